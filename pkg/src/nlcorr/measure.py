"""Joint and conditional probabilities for two-time spin correlation experiments.

Three algorithms are implemented:

``joint_open``
    Evolve the pair with the detection-time-dependent Hamiltonian and read
    the joint probability as <Psi(t)| E1 x E2 |Psi(t)> for t >= max(t1, t2).
``joint_projection_standard``
    Textbook projection at a distance: evolve to t1, collapse particle 1,
    renormalize and re-evolve particle 2 with the nonlinear generator
    recomputed from the collapsed state. Nonlocal for nonlinear dynamics.
``joint_projection_generalized``
    Same collapse, but particle 2 is carried from t1 to t2 by the effective
    propagator of the unperturbed trajectory. Agrees with ``joint_open``.

All three coincide for linear dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import dynamics, qstate
from .dynamics import DetectionSchedule
from .errors import NumericalError, UndefinedConditionalError, ValidationError

SIGNS = ("+", "-")
PAIRS = tuple((a, b) for a in SIGNS for b in SIGNS)
PROB_TOL = 1e-10
SUM_TOL = 1e-9
DEGENERATE = 1e-12

ALGORITHMS = ("open", "projection_standard", "projection_generalized")
_ALIASES = {"projection": "projection_standard", "standard": "projection_standard",
            "generalized": "projection_generalized"}


def algorithm_name(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    return name


@dataclass(frozen=True)
class JointSpec:
    axis1: object = "z"
    axis2: object = "z"
    sched: DetectionSchedule = DetectionSchedule(0.0, 0.0)
    sign1: str = "+"
    sign2: str = "+"

    def __post_init__(self):
        object.__setattr__(self, "axis1", qstate.bloch_axis(self.axis1))
        object.__setattr__(self, "axis2", qstate.bloch_axis(self.axis2))
        object.__setattr__(self, "sign1", qstate.sign_label(self.sign1))
        object.__setattr__(self, "sign2", qstate.sign_label(self.sign2))
        if not (np.isfinite(self.sched.t1) and np.isfinite(self.sched.t2)):
            raise ValidationError("joint probabilities need finite detection times")

    def swapped(self) -> "JointSpec":
        return JointSpec(self.axis2, self.axis1, self.sched.swapped(), self.sign2, self.sign1)


@dataclass(frozen=True)
class ProbabilityTable:
    """Joint outcome probabilities keyed by ('+'|'-', '+'|'-') plus both marginals."""

    p_joint: dict
    p_marg1: dict
    p_marg2: dict
    degenerate: tuple = field(default=())

    def __getitem__(self, key) -> float:
        return self.p_joint[tuple(qstate.sign_label(s) for s in key)]

    def correlation(self) -> float:
        """E = P(++) + P(--) - P(+-) - P(-+), the average of X1 x X2."""
        j = self.p_joint
        return j["+", "+"] + j["-", "-"] - j["+", "-"] - j["-", "+"]

    def as_array(self) -> np.ndarray:
        return np.array([self.p_joint[k] for k in PAIRS])

    def swapped(self) -> "ProbabilityTable":
        return ProbabilityTable(
            {(b, a): p for (a, b), p in self.p_joint.items()},
            dict(self.p_marg2),
            dict(self.p_marg1),
            tuple((3 - k, s) for k, s in self.degenerate),
        )


def _clamp(p: float, what: str) -> float:
    if not -PROB_TOL <= p <= 1 + PROB_TOL:
        raise NumericalError(f"{what} = {p!r} is not a probability")
    return min(max(p, 0.0), 1.0)


def make_table(joint: dict, marg1: dict, marg2: dict, degenerate=()) -> ProbabilityTable:
    """Assert the probability-table invariants, then clamp entries to [0, 1]."""
    joint = {k: _clamp(float(joint[k]), f"P{k}") for k in PAIRS}
    marg1 = {s: _clamp(float(marg1[s]), f"P1({s})") for s in SIGNS}
    marg2 = {s: _clamp(float(marg2[s]), f"P2({s})") for s in SIGNS}
    total = sum(joint.values())
    if abs(total - 1.0) > SUM_TOL:
        raise NumericalError(f"joint probabilities sum to {total!r}")
    for s in SIGNS:
        row = joint[s, "+"] + joint[s, "-"]
        col = joint["+", s] + joint["-", s]
        if abs(row - marg1[s]) > SUM_TOL or abs(col - marg2[s]) > SUM_TOL:
            raise NumericalError("marginals inconsistent with joint table")
    return ProbabilityTable(joint, marg1, marg2, tuple(degenerate))


def _require_qubits(f1, f2):
    if f1.dim != 2 or f2.dim != 2:
        raise ValidationError("spin-projector measurements need two spin-1/2 particles")


def _projectors(axis):
    return {s: qstate.spin_projector(axis, s) for s in SIGNS}


def collapse(psi, axis1, sign1) -> tuple[float, np.ndarray | None]:
    """Project particle 1 onto outcome ``sign1`` along ``axis1`` and renormalize.

    Returns (probability, collapsed state); the state is None when the
    probability is below 1e-12.
    """
    e = np.kron(qstate.spin_projector(axis1, sign1), qstate.I2)
    projected = e @ np.asarray(psi, dtype=complex)
    p = float(np.vdot(projected, projected).real)
    if p < DEGENERATE:
        return p, None
    return p, projected / np.sqrt(p)


def joint_open(psi0, f1, f2, spec: JointSpec, engine: str | None = None, dt: float = 1e-3) -> ProbabilityTable:
    """Open-system joint probabilities read off Psi_{t1,t2}(max(t1, t2))."""
    _require_qubits(f1, f2)
    state = dynamics.evolve(psi0, f1, f2, spec.sched, spec.sched.last, engine, dt).state
    e1, e2 = _projectors(spec.axis1), _projectors(spec.axis2)
    joint = {(a, b): qstate.expect(state, np.kron(e1[a], e2[b])) for a, b in PAIRS}
    marg1 = {s: qstate.expect(state, np.kron(e1[s], qstate.I2)) for s in SIGNS}
    marg2 = {s: qstate.expect(state, np.kron(qstate.I2, e2[s])) for s in SIGNS}
    return make_table(joint, marg1, marg2)


def _projection_table(psi_t1, spec, carry) -> ProbabilityTable:
    """Shared collapse bookkeeping; ``carry(branch_state)`` returns the state at t2."""
    e2 = _projectors(spec.axis2)
    joint, marg1, degenerate = {}, {}, []
    for a in SIGNS:
        p, branch = collapse(psi_t1, spec.axis1, a)
        marg1[a] = p
        if branch is None:
            degenerate.append((1, a))
            joint[a, "+"] = joint[a, "-"] = 0.0
            continue
        at_t2 = carry(branch)
        for b in SIGNS:
            joint[a, b] = p * qstate.expect(at_t2, np.kron(qstate.I2, e2[b]))
    marg2 = {b: joint["+", b] + joint["-", b] for b in SIGNS}
    return make_table(joint, marg1, marg2, degenerate)


def joint_projection_standard(psi0, f1, f2, spec: JointSpec, engine: str | None = None,
                              dt: float = 1e-3) -> ProbabilityTable:
    """Projection at a distance with the particle-2 generator recomputed from the collapsed state.

    If t2 < t1 the particles swap roles, so the earlier measurement is always
    the one that collapses the pair.
    """
    _require_qubits(f1, f2)
    t1, t2 = spec.sched.t1, spec.sched.t2
    if t2 < t1:
        psi_sw = qstate.swap_subsystems(psi0)
        return joint_projection_standard(psi_sw, f2, f1, spec.swapped(), engine, dt).swapped()
    psi_t1 = dynamics.evolve(psi0, f1, f2, spec.sched, t1, engine, dt).state
    # particle 1 is destroyed at t1; particle 2 keeps its Hamiltonian until t2
    after = DetectionSchedule(0.0, t2 - t1)

    def carry(branch):
        return dynamics.evolve(branch, f1, f2, after, t2 - t1, engine, dt).state

    return _projection_table(psi_t1, spec, carry)


def _segment_propagator(psi0, f1, f2, sched, start, stop, engine, dt):
    """Particle-2 effective propagator from ``start`` to ``stop`` along the unperturbed trajectory.

    Also returns the unperturbed pair state at ``start``.
    """
    engine = engine or dynamics.default_engine(f1, f2)
    if engine == "closed_form":
        rho2 = qstate.reduce(psi0, 2)
        u = dynamics.frozen_propagator(f2, rho2, dynamics.kappa(stop, sched.t2) - dynamics.kappa(start, sched.t2))
        psi_start = dynamics.closed_form(psi0, f1, f2, sched, start).state
        return psi_start, u
    if engine == "integrator":
        traj = dynamics.propagator_trajectory(psi0, f1, f2, sched, [start, stop], dt)
        return traj.states[0], traj.v2[1] @ traj.v2[0].conj().T
    raise ValidationError(f"unknown engine {engine!r}")


def joint_projection_generalized(psi0, f1, f2, spec: JointSpec, engine: str | None = None,
                                 dt: float = 1e-3) -> ProbabilityTable:
    """Projection at a distance with particle 2 carried by V2(t2) V2(t1)^dagger of the initial orbit."""
    _require_qubits(f1, f2)
    t1, t2 = spec.sched.t1, spec.sched.t2
    if t2 < t1:
        psi_sw = qstate.swap_subsystems(psi0)
        return joint_projection_generalized(psi_sw, f2, f1, spec.swapped(), engine, dt).swapped()
    psi_t1, u2 = _segment_propagator(psi0, f1, f2, spec.sched, t1, t2, engine, dt)
    lift = np.kron(qstate.I2, u2)
    return _projection_table(psi_t1, spec, lambda branch: lift @ branch)


def joint(psi0, f1, f2, spec: JointSpec, algorithm: str = "open", engine: str | None = None,
          dt: float = 1e-3) -> ProbabilityTable:
    fn = {
        "open": joint_open,
        "projection_standard": joint_projection_standard,
        "projection_generalized": joint_projection_generalized,
    }[algorithm_name(algorithm)]
    return fn(psi0, f1, f2, spec, engine, dt)


def conditional(table: ProbabilityTable, given) -> dict:
    """P[s_other | s_given] for ``given = (particle, sign)``."""
    particle, sign = given
    sign = qstate.sign_label(sign)
    if particle == 1:
        denom = table.p_marg1[sign]
        num = {s: table.p_joint[sign, s] for s in SIGNS}
    elif particle == 2:
        denom = table.p_marg2[sign]
        num = {s: table.p_joint[s, sign] for s in SIGNS}
    else:
        raise ValidationError(f"particle must be 1 or 2, got {particle!r}")
    if denom <= DEGENERATE:
        raise UndefinedConditionalError(f"P{particle}({sign}) = {denom!r} is too small to condition on")
    out = {s: num[s] / denom for s in SIGNS}
    if abs(sum(out.values()) - 1.0) > SUM_TOL:
        raise NumericalError("conditional probabilities do not sum to 1")
    return out


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted pair states at a list of sample times.

    ``states[i, j]`` is branch ``j`` at ``times[i]`` with weight ``weights[i, j]``.
    Before the particle-1 collapse every branch holds the uncollapsed state,
    so the mixture and each branch curve coincide there.
    """

    times: np.ndarray
    post: np.ndarray
    labels: tuple
    weights: np.ndarray
    states: np.ndarray
    dims: tuple = (2, 2)

    def branch_expect(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=complex)
        vals = np.einsum("tbi,ij,tbj->tb", self.states.conj(), obs, self.states)
        if np.abs(vals.imag).max(initial=0.0) >= qstate.IMAG_TOL:
            raise NumericalError("ensemble expectation has an imaginary part; observable not Hermitian?")
        return vals.real

    def expect(self, obs) -> np.ndarray:
        return np.einsum("tb,tb->t", self.weights, self.branch_expect(obs))

    def reduced(self, subsystem: int) -> np.ndarray:
        d1, d2 = self.dims
        m = self.states.reshape(*self.states.shape[:2], d1, d2)
        if subsystem == 1:
            rho = np.einsum("tbik,tbjk->tbij", m, m.conj())
        elif subsystem == 2:
            rho = np.einsum("tbki,tbkj->tbij", m, m.conj())
        else:
            raise ValidationError(f"subsystem must be 1 or 2, got {subsystem!r}")
        return np.einsum("tb,tbij->tij", self.weights, rho)


def ensemble(psi0, f1, f2, sched: DetectionSchedule, axis1, times: Sequence[float], post=None,
             algorithm: str = "open", engine: str | None = None, dt: float = 1e-3) -> Ensemble:
    """Pair ensemble at each sample time for the chosen measurement algorithm.

    ``post[i]`` marks samples taken after the particle-1 measurement; by
    default every sample with ``t >= t1`` is. A detection time can thus be
    sampled twice, once as a left and once as a right limit.
    """
    algorithm = algorithm_name(algorithm)
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0):
        raise ValidationError("sample times must be non-negative and non-decreasing")
    t1 = sched.t1
    post = times >= t1 if post is None else np.asarray(post, dtype=bool)
    if post.shape != times.shape:
        raise ValidationError("post mask must match the sample times")
    if np.any(post & (times < t1)):
        raise ValidationError("a post-measurement sample precedes t1")
    if np.any(post) and np.any(~post & (times > t1)):
        raise ValidationError("a pre-measurement sample follows t1")
    dims = (f1.dim, f2.dim)
    d = dims[0] * dims[1]
    t_end = float(times[-1]) if times.size else 0.0

    if algorithm == "open" or not np.any(post):
        traj = dynamics.evolve(psi0, f1, f2, sched, t_end, engine, dt, sample_times=times).trajectory
        states = traj.states.reshape(-1, 1, d) if times.size else np.zeros((0, 1, d), complex)
        return Ensemble(times, post, ("all",), np.ones((times.size, 1)), states, dims)

    _require_qubits(f1, f2)
    pre_times = np.append(times[~post], t1)
    if algorithm == "projection_standard":
        pre = dynamics.evolve(psi0, f1, f2, sched, t1, engine, dt, sample_times=pre_times).trajectory.states
        psi_t1 = pre[-1]
    else:
        post_times = times[post]
        eng = engine or dynamics.default_engine(f1, f2)
        if eng == "closed_form":
            orbit = dynamics.closed_form(psi0, f1, f2, sched, t_end, np.concatenate([pre_times, post_times]),
                                         propagators=True).trajectory
        else:
            orbit = dynamics.propagator_trajectory(psi0, f1, f2, sched, np.concatenate([pre_times, post_times]), dt)
        pre = orbit.states[: pre_times.size]
        psi_t1 = pre[-1]
        v2_t1 = orbit.v2[pre_times.size - 1]
        v2_post = orbit.v2[pre_times.size:]

    weights = np.zeros((times.size, 2))
    states = np.zeros((times.size, 2, d), dtype=complex)
    states[~post] = pre[:-1, None, :]
    after = DetectionSchedule(0.0, max(sched.t2 - t1, 0.0))
    for j, sign in enumerate(SIGNS):
        p, branch = collapse(psi_t1, axis1, sign)
        if branch is None:
            states[post, j] = psi_t1
            continue
        weights[:, j] = p
        if algorithm == "projection_standard":
            rel = times[post] - t1
            carried = dynamics.evolve(branch, f1, f2, after, float(rel[-1]), engine, dt, sample_times=rel)
            states[post, j] = carried.trajectory.states
        else:
            lift = [np.kron(qstate.I2, v @ v2_t1.conj().T) for v in v2_post]
            states[post, j] = np.array([u @ branch for u in lift])
    return Ensemble(times, post, SIGNS, weights, states, dims)


def ensemble_average_after_measurement(psi0, f1, f2, sched: DetectionSchedule, axis1, obs, t: float,
                                       algorithm: str = "open", engine: str | None = None,
                                       dt: float = 1e-3) -> float:
    """Ensemble average of ``obs`` at time ``t``, with particle 1 measured along ``axis1`` at t1.

    Under ``open`` this is the average in the uncollapsed open-system state;
    under the projection algorithms it is the outcome-weighted mixture of the
    two collapsed branches.
    """
    if not t >= 0:
        raise ValidationError(f"time must be >= 0, got {t!r}")
    ens = ensemble(psi0, f1, f2, sched, axis1, [t], algorithm=algorithm, engine=engine, dt=dt)
    return float(ens.expect(obs)[0])
