"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own code paths: partial
traces are explicit index loops and propagators come from scipy's ``expm`` of
the full two-particle generator.
"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)
Z0 = 7 * math.sqrt(2) / 18  # |<sz>| of either particle in the reference state


def ket1():
    return np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)], dtype=complex)


def ket2():
    return np.array([-math.sin(math.pi / 8), math.cos(math.pi / 8)], dtype=complex)


def reference_state():
    """(1/3)|1>|2> - (2 sqrt2 / 3)|2>|1>, built by explicit outer products."""
    psi = np.zeros(4, dtype=complex)
    for i in range(2):
        for j in range(2):
            psi[2 * i + j] = ket1()[i] * ket2()[j] / 3 - 2 * math.sqrt(2) / 3 * ket2()[i] * ket1()[j]
    return psi


def partial_trace(psi, keep, d1=2, d2=2):
    """Brute-force reduced density matrix, standard convention rho = Tr_other |psi><psi|."""
    if keep == 1:
        rho = np.zeros((d1, d1), dtype=complex)
        for a in range(d1):
            for b in range(d1):
                rho[a, b] = sum(psi[a * d2 + c] * np.conj(psi[b * d2 + c]) for c in range(d2))
    else:
        rho = np.zeros((d2, d2), dtype=complex)
        for a in range(d2):
            for b in range(d2):
                rho[a, b] = sum(psi[c * d2 + a] * np.conj(psi[c * d2 + b]) for c in range(d1))
    return rho


def mean(psi, op):
    return complex(np.conj(psi) @ op @ psi).real


def projector(axis, sign):
    a = np.asarray(axis, dtype=float)
    return 0.5 * (I2 + sign * (a[0] * SX + a[1] * SY + a[2] * SZ))


def curie_weiss_oracle(psi0, A, B, t1, t2, t):
    """Full 4x4 expm of the frozen Curie-Weiss generator."""
    z1 = np.trace(partial_trace(psi0, 1) @ SZ).real
    z2 = np.trace(partial_trace(psi0, 2) @ SZ).real
    gen = A * z1 * min(t, t1) * np.kron(SZ, I2) + B * z2 * min(t, t2) * np.kron(I2, SZ)
    return expm(-1j * gen) @ psi0


def heisenberg_joint(psi0, h1, h2, axis1, axis2, t1, t2, s1, s2):
    """<Psi0| E1(t1) x E2(t2) |Psi0> with E_k(t) = e^{i H_k t} E_k e^{-i H_k t}."""
    u1, u2 = expm(-1j * h1 * t1), expm(-1j * h2 * t2)
    e1 = u1.conj().T @ projector(axis1, s1) @ u1
    e2 = u2.conj().T @ projector(axis2, s2) @ u2
    return mean(psi0, np.kron(e1, e2))


@pytest.fixture
def vi_c():
    from nlcorr import hamfun
    from nlcorr.dynamics import DetectionSchedule

    return reference_state(), hamfun.curie_weiss(8.0), hamfun.curie_weiss(0.5), DetectionSchedule(3.5, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
