"""Hamiltonian functionals H(rho) on one-particle density matrices.

A functional maps a density matrix to a real energy and carries the analytic
gradient operator ``grad(rho)``, whose ``(b, a)`` entry is ``dH/d rho[a, b]``.
With this index convention a linear functional ``Tr(rho H0)`` has gradient
``H0`` and the two-particle equation of motion reads
``i dPsi/dt = (H1(rho1) x I + I x H2(rho2)) Psi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import qstate
from .errors import ValidationError


class HamiltonianFunctional:
    """Base class. Subclasses define ``dim``, ``__call__`` and ``grad``.

    ``stationary_generator`` is True when ``grad(rho(t))`` stays constant along
    the functional's own flow, which makes a frozen-generator closed form exact.
    """

    dim: int
    stationary_generator: bool = False

    def __call__(self, rho) -> float:
        raise NotImplementedError

    def grad(self, rho) -> np.ndarray:
        raise NotImplementedError

    def on_state(self, psi) -> float:
        """H evaluated on the pure state |psi><psi|."""
        return self(qstate.pure_density(psi))


@dataclass(frozen=True, eq=False)
class LinearFunctional(HamiltonianFunctional):
    """H(rho) = Tr(rho h0); the gradient is h0 for every rho."""

    h0: np.ndarray
    stationary_generator: bool = field(default=True, init=False)

    def __post_init__(self):
        h0 = qstate.observable(self.h0)
        h0.flags.writeable = False
        object.__setattr__(self, "h0", h0)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def __call__(self, rho) -> float:
        return float(np.trace(np.asarray(rho) @ self.h0).real)

    def grad(self, rho) -> np.ndarray:
        return self.h0


@dataclass(frozen=True, eq=False)
class CurieWeiss(HamiltonianFunctional):
    """Mean-field functional coeff * Tr(rho sigma_z)**2 / 2 on a spin-1/2.

    Its gradient ``coeff * <sigma_z> * sigma_z`` generates a rotation about z,
    which leaves ``<sigma_z>`` and hence the gradient itself unchanged.
    """

    coeff: float
    stationary_generator: bool = field(default=True, init=False)
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        c = float(self.coeff)
        if not np.isfinite(c):
            raise ValidationError("Curie-Weiss coefficient must be finite")
        object.__setattr__(self, "coeff", c)

    def _mean_sz(self, rho) -> float:
        return qstate.expect(np.asarray(rho), qstate.SZ)

    def __call__(self, rho) -> float:
        return self.coeff * self._mean_sz(rho) ** 2 / 2

    def grad(self, rho) -> np.ndarray:
        # Tr(rho sz) without the generic expect() checks; this runs inside the RK4 loop
        mean_sz = (rho[0, 0] - rho[1, 1]).real
        return (self.coeff * mean_sz) * qstate.SZ


def linear_functional(h0) -> LinearFunctional:
    return LinearFunctional(h0)


def curie_weiss(coeff: float) -> CurieWeiss:
    return CurieWeiss(coeff)


def zero_functional(dim: int = 2) -> LinearFunctional:
    return LinearFunctional(np.zeros((dim, dim)))


def numeric_grad(f: HamiltonianFunctional, rho, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference estimate of ``f.grad(rho)``.

    Off-diagonal entries are perturbed in Hermitian pairs: ``(eps, eps)`` on
    ``(rho[a,b], rho[b,a])`` for the real direction and ``(i eps, -i eps)`` for
    the imaginary one. The two directional derivatives determine
    ``dH/d rho[a,b]`` and ``dH/d rho[b,a]`` separately.
    """
    if not 1e-8 <= h <= 1e-3:
        raise ValidationError(f"finite-difference step {h!r} outside [1e-8, 1e-3]")
    rho = np.array(rho, dtype=complex)
    n = rho.shape[0]
    out = np.zeros((n, n), dtype=complex)

    def directional(delta):
        return (f(rho + h * delta) - f(rho - h * delta)) / (2 * h)

    for a in range(n):
        delta = np.zeros((n, n), dtype=complex)
        delta[a, a] = 1.0
        out[a, a] = directional(delta)
        for b in range(a + 1, n):
            delta = np.zeros((n, n), dtype=complex)
            delta[a, b] = delta[b, a] = 1.0
            d_re = directional(delta)
            delta[a, b], delta[b, a] = 1j, -1j
            d_im = directional(delta)
            # d_re = g_ab + g_ba, d_im = i (g_ab - g_ba) with g_xy = dH/d rho[x,y]
            g_ab = (d_re - 1j * d_im) / 2
            g_ba = (d_re + 1j * d_im) / 2
            out[b, a] = g_ab
            out[a, b] = g_ba
    return out


@dataclass(frozen=True, eq=False)
class PsiFunctional:
    """A real function of a state vector, used only for the phase-invariance check."""

    dim: int
    fn: Callable[[np.ndarray], float]

    def __call__(self, psi) -> float:
        return float(self.fn(np.asarray(psi, dtype=complex)))


def psi_form(f: HamiltonianFunctional) -> PsiFunctional:
    """The state-vector form psi -> H(|psi><psi|)."""
    return PsiFunctional(f.dim, f.on_state)


def verify_phase_invariance(f: PsiFunctional, samples: int = 100, seed: int = 0) -> bool:
    """Check f(e^{i alpha} psi) == f(psi) to 1e-10 on seeded random (psi, alpha).

    Passing is necessary, not sufficient, for f to be a function of |psi><psi|.
    """
    if samples < 10:
        raise ValidationError("phase-invariance check needs at least 10 samples")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        psi = qstate.random_state(rng, f.dim)
        alpha = rng.uniform(0.0, 2 * np.pi)
        if not abs(f(np.exp(1j * alpha) * psi) - f(psi)) < 1e-10:
            return False
    return True
