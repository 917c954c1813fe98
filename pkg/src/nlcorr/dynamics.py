"""Time evolution of a particle pair under the open-system nonlinear equation

    i dPsi/dt = [theta(t - t1) H1(rho1) x I + theta(t - t2) I x H2(rho2)] Psi,

where ``theta(x)`` is 1 for ``x < 0`` and 0 otherwise, so the k-th Hamiltonian
is switched off at its detection time ``t_k``. Setting both detection times to
``inf`` gives the closed two-particle system.

Two engines are provided: a fixed-step classical RK4 integrator that never
steps across a detection time, and an exact frozen-generator propagator for
functionals whose gradient is constant along their own flow (linear and
Curie-Weiss).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qstate
from .errors import NumericalError, ValidationError
from .hamfun import CurieWeiss, HamiltonianFunctional

NORM_DRIFT_LIMIT = 1e-6
MAX_DT = 0.01
_MERGE_TOL = 1e-12

ENGINES = ("closed_form", "integrator")


def theta(x: float) -> float:
    """Detector switch: 1 for x < 0, else 0 (so theta(0) == 0)."""
    return 1.0 if x < 0 else 0.0


def kappa(t: float, tk: float) -> float:
    """Elapsed interaction time, the integral of theta(tau - tk) over [0, t]."""
    return min(t, tk)


@dataclass(frozen=True)
class DetectionSchedule:
    """Detection times of particles 1 and 2; ``inf`` means never detected."""

    t1: float = math.inf
    t2: float = math.inf

    def __post_init__(self):
        for name in ("t1", "t2"):
            v = float(getattr(self, name))
            if math.isnan(v) or v < 0:
                raise ValidationError(f"detection time {name} must be >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def last(self) -> float:
        return max(self.t1, self.t2)

    def swapped(self) -> "DetectionSchedule":
        return DetectionSchedule(self.t2, self.t1)


CLOSED = DetectionSchedule()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States (and optionally the effective propagators) at requested times."""

    times: np.ndarray
    states: np.ndarray
    v1: np.ndarray | None = None
    v2: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    t: float
    state: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    dims: tuple[int, int]
    trajectory: Trajectory | None = None


def _check_inputs(psi0, f1, f2, t, dt=None):
    dims = (f1.dim, f2.dim)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != dims[0] * dims[1]:
        raise ValidationError(f"state dimension {psi0.size} does not match functionals {dims}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"initial state norm is {norm!r}, expected 1")
    if not (t >= 0 and math.isfinite(t)):
        raise ValidationError(f"evolution time must be finite and >= 0, got {t!r}")
    if dt is not None and not 0 < dt <= MAX_DT:
        raise ValidationError(f"dt must lie in (0, {MAX_DT}], got {dt!r}")
    return psi0, dims


def _sorted_samples(sample_times) -> np.ndarray:
    ts = np.asarray([] if sample_times is None else sample_times, dtype=float).reshape(-1)
    if ts.size and (np.any(np.diff(ts) < 0) or ts[0] < 0 or not np.all(np.isfinite(ts))):
        raise ValidationError("sample times must be finite, non-negative and non-decreasing")
    return ts


def _result(state, dims, t, traj=None) -> EvolutionResult:
    return EvolutionResult(
        t=t,
        state=state,
        rho1=qstate.reduce(state, 1, dims),
        rho2=qstate.reduce(state, 2, dims),
        dims=dims,
        trajectory=traj,
    )


def _integrate(psi0, f1, f2, sched, t, dt, sample_times=None, propagators=False):
    """RK4 core. Returns (final state, V1, V2, Trajectory or None)."""
    psi0, dims = _check_inputs(psi0, f1, f2, t, dt)
    samples = _sorted_samples(sample_times)
    d1, d2 = dims
    t_stop = min(t, sched.last)
    if samples.size:
        t_stop_all = min(max(t, samples[-1]), sched.last)
    else:
        t_stop_all = t_stop

    marks = {0.0, t_stop_all}
    marks.update(x for x in (sched.t1, sched.t2) if x < t_stop_all)
    marks.update(float(x) for x in samples if x < t_stop_all)
    marks.add(t_stop)
    grid = sorted(marks)
    # merge marks closer than rounding
    points = [grid[0]]
    for x in grid[1:]:
        if x - points[-1] > _MERGE_TOL:
            points.append(x)
        else:
            points[-1] = max(points[-1], x)

    m = psi0.reshape(d1, d2).copy()
    v1 = np.eye(d1, dtype=complex) if propagators else None
    v2 = np.eye(d2, dtype=complex) if propagators else None
    grad1, grad2 = f1.grad, f2.grad

    def rhs(mat, th1, th2, u1, u2):
        dm = np.zeros_like(mat)
        du1 = du2 = None
        if th1:
            h1 = grad1(mat @ mat.conj().T)
            dm += h1 @ mat
            if u1 is not None:
                du1 = -1j * (h1 @ u1)
        if th2:
            h2 = grad2(mat.T @ mat.conj())
            dm += mat @ h2.T
            if u2 is not None:
                du2 = -1j * (h2 @ u2)
        return -1j * dm, du1, du2

    def add(u, k, h):
        return u if (u is None or k is None) else u + h * k

    def combine(u, ks, h):
        if u is None or ks[0] is None:
            return u
        return u + (h / 6.0) * (ks[0] + 2 * ks[1] + 2 * ks[2] + ks[3])

    snapshots = {}  # mark -> (state, v1, v2)
    snapshots[points[0]] = (m.reshape(-1).copy(), v1, v2)
    for a, b in zip(points[:-1], points[1:]):
        mid = 0.5 * (a + b)
        th1, th2 = theta(mid - sched.t1), theta(mid - sched.t2)
        if th1 or th2:
            n = max(1, math.ceil((b - a) / dt - 1e-9))
            h = (b - a) / n
            for step in range(n):
                k1 = rhs(m, th1, th2, v1, v2)
                k2 = rhs(m + 0.5 * h * k1[0], th1, th2, add(v1, k1[1], 0.5 * h), add(v2, k1[2], 0.5 * h))
                k3 = rhs(m + 0.5 * h * k2[0], th1, th2, add(v1, k2[1], 0.5 * h), add(v2, k2[2], 0.5 * h))
                k4 = rhs(m + h * k3[0], th1, th2, add(v1, k3[1], h), add(v2, k3[2], h))
                m = m + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                v1 = combine(v1, [k[1] for k in (k1, k2, k3, k4)], h)
                v2 = combine(v2, [k[2] for k in (k1, k2, k3, k4)], h)
                drift = abs(np.vdot(m, m).real - 1.0)
                if drift > NORM_DRIFT_LIMIT:
                    raise NumericalError(
                        f"norm drift {drift:.3e} at t={a + (step + 1) * h:.6g} exceeds "
                        f"{NORM_DRIFT_LIMIT:g}; reduce dt (currently {dt:g})"
                    )
        snapshots[b] = (m.reshape(-1).copy(), v1, v2)

    if propagators:
        for u in (v1, v2):
            err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
            if err > NORM_DRIFT_LIMIT:
                raise NumericalError(f"propagator unitarity drift {err:.3e} exceeds {NORM_DRIFT_LIMIT:g}")

    keys = np.array(points)

    def lookup(x):
        x = min(x, t_stop_all)
        i = int(np.argmin(np.abs(keys - x)))
        return snapshots[points[i]]

    final = lookup(t_stop)
    traj = None
    if samples.size:
        snaps = [lookup(x) for x in samples]
        traj = Trajectory(
            times=samples,
            states=np.array([s[0] for s in snaps]),
            v1=np.array([s[1] for s in snaps]) if propagators else None,
            v2=np.array([s[2] for s in snaps]) if propagators else None,
        )
    return final[0], final[1], final[2], traj, dims


def evolve_open(psi0, f1: HamiltonianFunctional, f2: HamiltonianFunctional, sched: DetectionSchedule,
                t: float, dt: float = 1e-3, sample_times: Sequence[float] | None = None) -> EvolutionResult:
    """Integrate the open-system pair equation with classical RK4 at fixed step ``dt``.

    Integration is split at t1, t2 and at every requested sample time, and
    stops at max(t1, t2) since the state is frozen afterwards. The norm is
    monitored but never corrected; drift above 1e-6 raises NumericalError.
    """
    state, _, _, traj, dims = _integrate(psi0, f1, f2, sched, t, dt, sample_times)
    return _result(state, dims, t, traj)


def evolve_closed(psi0, f1, f2, t: float, dt: float = 1e-3, sample_times=None) -> EvolutionResult:
    """Closed two-particle system: both Hamiltonians act for all times."""
    return evolve_open(psi0, f1, f2, CLOSED, t, dt, sample_times)


def effective_propagators(psi0, f1, f2, sched: DetectionSchedule, t: float, dt: float = 1e-3):
    """One-particle unitaries (V1, V2) with V1 x V2 |psi0> = Psi(t).

    V_k solves i dV_k/dt = theta(t - t_k) H_k(rho_k(t)) V_k along the
    trajectory, integrated in lockstep with the pair state so every RK4 stage
    sees the gradient of the matching stage state.
    """
    state, v1, v2, _, dims = _integrate(psi0, f1, f2, sched, t, dt, propagators=True)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    mismatch = np.linalg.norm(np.kron(v1, v2) @ psi0 - state)
    if mismatch > NORM_DRIFT_LIMIT:
        raise NumericalError(f"pair state does not factorize: |V1 x V2 psi0 - Psi| = {mismatch:.3e}")
    return v1, v2


def propagator_trajectory(psi0, f1, f2, sched, sample_times, dt: float = 1e-3) -> Trajectory:
    """Effective propagators and states at each of ``sample_times``."""
    samples = _sorted_samples(sample_times)
    t = float(samples[-1]) if samples.size else 0.0
    *_, traj, _ = _integrate(psi0, f1, f2, sched, t, dt, samples, propagators=True)
    return traj


def frozen_propagator(f: HamiltonianFunctional, rho0, tau: float) -> np.ndarray:
    """exp(-i tau H(rho0)); exact when the gradient is conserved by the flow."""
    if not f.stationary_generator:
        raise ValidationError(f"{type(f).__name__} has no frozen-generator closed form")
    return qstate.unitary_exp(f.grad(rho0), tau)


def closed_form(psi0, f1, f2, sched: DetectionSchedule, t: float, sample_times=None,
                propagators: bool = False) -> EvolutionResult:
    """Exact propagation V1(kappa(t,t1)) x V2(kappa(t,t2)) |psi0> for stationary-generator functionals."""
    psi0, dims = _check_inputs(psi0, f1, f2, t)
    rho1 = qstate.reduce(psi0, 1, dims)
    rho2 = qstate.reduce(psi0, 2, dims)
    g1, g2 = f1.grad(rho1), f2.grad(rho2)
    if not (f1.stationary_generator and f2.stationary_generator):
        raise ValidationError("closed-form engine needs stationary-generator functionals")

    def state_at(x):
        u1 = qstate.unitary_exp(g1, kappa(x, sched.t1))
        u2 = qstate.unitary_exp(g2, kappa(x, sched.t2))
        return np.kron(u1, u2) @ psi0, u1, u2

    traj = None
    samples = _sorted_samples(sample_times)
    if samples.size:
        snaps = [state_at(float(x)) for x in samples]
        traj = Trajectory(
            times=samples,
            states=np.array([s[0] for s in snaps]),
            v1=np.array([s[1] for s in snaps]) if propagators else None,
            v2=np.array([s[2] for s in snaps]) if propagators else None,
        )
    return _result(state_at(t)[0], dims, t, traj)


def curie_weiss_closed_form(psi0, A: float, B: float, sched: DetectionSchedule, t: float) -> EvolutionResult:
    """Explicit Curie-Weiss pair solution.

    Psi(t) = exp(-i A <sz>_1 sz kappa(t,t1)) x exp(-i B <sz>_2 sz kappa(t,t2)) Psi0,
    with both averages taken in Psi0. The reduced matrices are the local
    rotations of rho_k(0).
    """
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != 4:
        raise ValidationError("Curie-Weiss closed form needs a two-qubit state")
    _check_inputs(psi0, CurieWeiss(A), CurieWeiss(B), t)
    rho1_0 = qstate.reduce(psi0, 1)
    rho2_0 = qstate.reduce(psi0, 2)
    z1 = qstate.expect(rho1_0, qstate.SZ)
    z2 = qstate.expect(rho2_0, qstate.SZ)
    phi1 = A * z1 * kappa(t, sched.t1)
    phi2 = B * z2 * kappa(t, sched.t2)
    u1 = np.diag([np.exp(-1j * phi1), np.exp(1j * phi1)])
    u2 = np.diag([np.exp(-1j * phi2), np.exp(1j * phi2)])
    state = np.kron(u1, u2) @ psi0
    return EvolutionResult(
        t=t,
        state=state,
        rho1=u1 @ rho1_0 @ u1.conj().T,
        rho2=u2 @ rho2_0 @ u2.conj().T,
        dims=(2, 2),
    )


def default_engine(f1, f2) -> str:
    if isinstance(f1, CurieWeiss) and isinstance(f2, CurieWeiss):
        return "closed_form"
    return "integrator"


def evolve(psi0, f1, f2, sched: DetectionSchedule, t: float, engine: str | None = None,
           dt: float = 1e-3, sample_times=None) -> EvolutionResult:
    """Dispatch to the closed form or the integrator (default per functional types)."""
    engine = engine or default_engine(f1, f2)
    if engine == "closed_form":
        return closed_form(psi0, f1, f2, sched, t, sample_times)
    if engine == "integrator":
        return evolve_open(psi0, f1, f2, sched, t, dt, sample_times)
    raise ValidationError(f"unknown engine {engine!r}; expected one of {ENGINES}")
