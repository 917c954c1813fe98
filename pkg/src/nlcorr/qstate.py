"""Finite-dimensional state vectors, density matrices and spin observables.

Everything here is a plain ``numpy`` array:

* a state vector is a 1-D ``complex128`` array of unit norm,
* a density matrix or an observable is a square ``complex128`` array.

Two-particle vectors use the row-major (Kronecker) index convention,
``k = k1 * d2 + k2``, so particle 1 is the slow index.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NumericalError, ValidationError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_FLOOR = -1e-10
IMAG_TOL = 1e-10
MAX_DIM = 2**20


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


I2 = _frozen(np.eye(2))
SX = _frozen([[0, 1], [1, 0]])
SY = _frozen([[0, -1j], [1j, 0]])
SZ = _frozen([[1, 0], [0, -1]])
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}

_NAMED_AXES = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
}


def state_vector(amplitudes, normalize: bool = True) -> np.ndarray:
    """Build a normalized state vector from an amplitude sequence.

    With ``normalize=False`` the input must already have unit norm.
    """
    psi = np.array(amplitudes, dtype=complex).reshape(-1)
    if psi.size == 0:
        raise ValidationError("state vector must have at least one amplitude")
    if psi.size > MAX_DIM:
        raise ValidationError(f"dimension {psi.size} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(psi)):
        raise ValidationError("state vector has non-finite amplitudes")
    norm = np.linalg.norm(psi)
    if normalize:
        if norm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return psi / norm
    if abs(norm - 1.0) > NORM_TOL:
        raise ValidationError(f"state vector norm is {norm!r}, expected 1")
    return psi


def is_hermitian(op, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and np.allclose(op, op.conj().T, rtol=0, atol=tol)


def observable(entries, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return a Hermitian matrix."""
    op = np.array(entries, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValidationError(f"observable must be a square matrix, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ValidationError("observable has non-finite entries")
    if not is_hermitian(op, tol):
        raise ValidationError("observable is not Hermitian")
    return op


def density_matrix(entries, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return a density matrix (Hermitian, unit trace, PSD up to -1e-10)."""
    rho = np.array(entries, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
    if not is_hermitian(rho, tol):
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < PSD_FLOOR:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def bloch_axis(axis, normalize: bool = False) -> np.ndarray:
    """Return a real unit 3-vector. Accepts 'x', 'y', 'z' or three components."""
    if isinstance(axis, str):
        try:
            return np.array(_NAMED_AXES[axis.lower()])
        except KeyError:
            raise ValidationError(f"unknown axis name {axis!r}") from None
    a = np.array(axis, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValidationError(f"Bloch axis must be three finite reals, got {axis!r}")
    n = np.linalg.norm(a)
    if normalize:
        if n == 0.0:
            raise ValidationError("zero Bloch axis")
        return a / n
    if abs(n - 1.0) > NORM_TOL:
        raise ValidationError(f"Bloch axis has norm {n!r}, expected 1")
    return a


def sign_label(sign) -> str:
    """Normalize an outcome label to '+' or '-'."""
    if sign in ("+", 1, +1.0):
        return "+"
    if sign in ("-", -1, -1.0):
        return "-"
    raise ValidationError(f"outcome sign must be '+' or '-', got {sign!r}")


def spin_operator(axis) -> np.ndarray:
    """a . sigma for a unit axis."""
    a = bloch_axis(axis)
    return a[0] * SX + a[1] * SY + a[2] * SZ


def spin_projector(axis, sign) -> np.ndarray:
    """Projector (I +/- a.sigma)/2 onto spin up/down along ``axis``."""
    s = 1.0 if sign_label(sign) == "+" else -1.0
    return 0.5 * (I2 + s * spin_operator(axis))


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two vectors or two matrices (row-major composite index)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise ValidationError("tensor operands must both be vectors or both be matrices")
    if a.shape[0] * b.shape[0] > MAX_DIM:
        raise ValidationError(f"tensor product dimension exceeds {MAX_DIM}")
    return np.kron(a, b)


def _as_matrix(psi, dims) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    d1, d2 = (int(d) for d in dims)
    if d1 < 1 or d2 < 1 or psi.size != d1 * d2:
        raise ValidationError(f"state of dimension {psi.size} does not match dims {tuple(dims)}")
    return psi.reshape(d1, d2)


def reduce(psi, subsystem: int, dims: Sequence[int] = (2, 2)) -> np.ndarray:
    """Partial trace of |psi><psi| over the complementary subsystem."""
    m = _as_matrix(psi, dims)
    if subsystem == 1:
        return m @ m.conj().T
    if subsystem == 2:
        return m.T @ m.conj()
    raise ValidationError(f"subsystem must be 1 or 2, got {subsystem!r}")


def swap_subsystems(psi, dims: Sequence[int] = (2, 2)) -> np.ndarray:
    """Relabel particles: |a>|b> -> |b>|a>."""
    return _as_matrix(psi, dims).T.reshape(-1).copy()


def expect(state, obs) -> float:
    """<psi|X|psi> for a vector or Tr(rho X) for a matrix, as a real number.

    Raises NumericalError if the imaginary residue is 1e-10 or larger.
    """
    state = np.asarray(state)
    obs = np.asarray(obs)
    if obs.ndim != 2 or obs.shape[0] != obs.shape[1] or obs.shape[0] != state.shape[0]:
        raise ValidationError(f"observable shape {obs.shape} does not match state shape {state.shape}")
    if state.ndim == 1:
        value = np.vdot(state, obs @ state)
    elif state.ndim == 2:
        value = np.trace(state @ obs)
    else:
        raise ValidationError("state must be a vector or a square matrix")
    if abs(value.imag) >= IMAG_TOL:
        raise NumericalError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def unitary_exp(h, tau: float) -> np.ndarray:
    """exp(-i tau h) for Hermitian ``h``.

    Diagonal generators are exponentiated entrywise, so ``tau == 0`` gives the
    identity exactly.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    if tau == 0.0:
        return np.eye(n, dtype=complex)
    if np.count_nonzero(h - np.diag(np.diagonal(h))) == 0:
        return np.diag(np.exp(-1j * tau * np.diagonal(h).real))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * tau * w)) @ v.conj().T


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_density_matrix(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_schmidt_state(rng: np.random.Generator, d1: int = 2, d2: int = 2) -> np.ndarray:
    """Entangled state sum_k c_k |e_k>|f_k> in random local bases with random complex c_k."""
    r = min(d1, d2)
    c = random_state(rng, r)
    e = random_unitary(rng, d1)
    f = random_unitary(rng, d2)
    psi = sum(c[k] * np.kron(e[:, k], f[:, k]) for k in range(r))
    return psi / np.linalg.norm(psi)


def bell_singlet() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def vi_c_state() -> np.ndarray:
    """(1/3)|1>|2> - (2 sqrt2/3)|2>|1> with |1> = (cos pi/8, sin pi/8), |2> = (-sin pi/8, cos pi/8)."""
    c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
    one = np.array([c, s], dtype=complex)
    two = np.array([-s, c], dtype=complex)
    return np.kron(one, two) / 3.0 - (2.0 * np.sqrt(2.0) / 3.0) * np.kron(two, one)
