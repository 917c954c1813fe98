"""Runtime invariant suite behind ``nlcorr check``.

Each check returns a :class:`CheckResult`; nothing raises on a failed
property, so the CLI can report every line.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import dynamics, hamfun, measure, qstate, scenario
from .dynamics import DetectionSchedule

Z0 = 7 * math.sqrt(2) / 18


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _vi_c():
    return qstate.vi_c_state(), hamfun.curie_weiss(8.0), hamfun.curie_weiss(0.5), DetectionSchedule(3.5, 8.0)


def check_conservation(seed: int) -> CheckResult:
    psi, f1, f2, sched = _vi_c()
    zi, iz = np.kron(qstate.SZ, qstate.I2), np.kron(qstate.I2, qstate.SZ)
    times = np.linspace(0, 10, 101)
    closed = dynamics.closed_form(psi, f1, f2, sched, 10.0, times).trajectory.states
    rk = dynamics.evolve_open(psi, f1, f2, sched, 10.0, 1e-3, times).trajectory.states
    dev_c = max(max(abs(qstate.expect(s, zi) + Z0), abs(qstate.expect(s, iz) - Z0)) for s in closed)
    dev_r = max(max(abs(qstate.expect(s, zi) + Z0), abs(qstate.expect(s, iz) - Z0)) for s in rk)
    return CheckResult("conservation of <sz>_1, <sz>_2", dev_c <= 1e-12 and dev_r <= 1e-8,
                       f"closed form {dev_c:.2e} (<=1e-12), RK4 {dev_r:.2e} (<=1e-8)")


def check_integrator(seed: int) -> CheckResult:
    psi, f1, f2, sched = _vi_c()
    times = np.linspace(0, 10, 101)
    closed = dynamics.closed_form(psi, f1, f2, sched, 10.0, times).trajectory.states

    def err(dt):
        rk = dynamics.evolve_open(psi, f1, f2, sched, 10.0, dt, times).trajectory.states
        return float(np.linalg.norm(rk - closed, axis=1).max())

    e = [err(dt) for dt in (1e-2, 5e-3, 2.5e-3)]
    e_fine = err(1e-3)
    ratios = [e[0] / e[1], e[1] / e[2]]
    ok = e_fine <= 1e-6 and min(ratios) >= 10
    return CheckResult("RK4 vs closed form", ok,
                       f"max error at dt=1e-3 {e_fine:.2e}; halving ratios {ratios[0]:.1f}, {ratios[1]:.1f}")


def check_locality(seed: int) -> CheckResult:
    base = scenario.ExperimentConfig.preset("vi_c")
    report = scenario.locality_audit(base, [{"B": 5.0}, {"t2": 2.0}, {"axis2": "z"}], target=1)
    worst = max(e.deviation for e in report.entries)
    return CheckResult("locality of particle 1 (open)", report.passed, f"max deviation {worst:.2e} (<=1e-9)")


def heisenberg_joint(psi0, h1, h2, axis1, axis2, t1, t2):
    """<Psi0| E1(t1) x E2(t2) |Psi0> with E_k(t) = e^{iH_k t} E_k e^{-iH_k t}."""
    out = {}
    for a in measure.SIGNS:
        for b in measure.SIGNS:
            u1, u2 = expm(-1j * h1 * t1), expm(-1j * h2 * t2)
            e1 = u1.conj().T @ qstate.spin_projector(axis1, a) @ u1
            e2 = u2.conj().T @ qstate.spin_projector(axis2, b) @ u2
            out[a, b] = float(np.vdot(psi0, np.kron(e1, e2) @ psi0).real)
    return out


def check_linear_unanimity(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    psi = qstate.bell_singlet()
    h1, h2 = np.array(qstate.SZ), np.array(qstate.SX)
    f1, f2 = hamfun.linear_functional(h1), hamfun.linear_functional(h2)
    worst = 0.0
    for _ in range(10):
        t1, t2 = rng.uniform(0, 2, size=2)
        a1, a2 = (qstate.bloch_axis(rng.normal(size=3), normalize=True) for _ in range(2))
        spec = measure.JointSpec(a1, a2, DetectionSchedule(t1, t2))
        ref = heisenberg_joint(psi, h1, h2, a1, a2, t1, t2)
        for alg in measure.ALGORITHMS:
            tab = measure.joint(psi, f1, f2, spec, alg)
            worst = max(worst, max(abs(tab.p_joint[k] - ref[k]) for k in measure.PAIRS))
    return CheckResult("linear-case unanimity", worst <= 1e-9, f"max disagreement {worst:.2e} (<=1e-9)")


def random_curie_weiss_scenario(rng: np.random.Generator):
    psi = qstate.random_schmidt_state(rng)
    a, b = rng.uniform(-10, 10, size=2)
    t1, t2 = rng.uniform(0, 10, size=2)
    ax1, ax2 = (qstate.bloch_axis(rng.normal(size=3), normalize=True) for _ in range(2))
    return psi, hamfun.curie_weiss(a), hamfun.curie_weiss(b), measure.JointSpec(ax1, ax2, DetectionSchedule(t1, t2))


def check_generalized(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    psi, f1, f2, sched = _vi_c()
    cases = [(psi, f1, f2, measure.JointSpec("x", "x", sched))]
    cases += [random_curie_weiss_scenario(rng) for _ in range(5)]
    worst = 0.0
    for psi0, g1, g2, spec in cases:
        ref = measure.joint_open(psi0, g1, g2, spec, engine="closed_form").as_array()
        gen = measure.joint_projection_generalized(psi0, g1, g2, spec, engine="integrator").as_array()
        worst = max(worst, float(np.abs(ref - gen).max()))
    return CheckResult("generalized projection == open", worst <= 1e-6, f"max difference {worst:.2e} (<=1e-6)")


def check_nonlocality_witness(seed: int) -> CheckResult:
    fig1 = scenario.measurement_footprint(scenario.ExperimentConfig.preset("figure1"))
    fig2 = scenario.measurement_footprint(scenario.ExperimentConfig.preset("figure2"))
    ok = fig2["trend_break"] > 1e-3 and fig1["trend_break"] <= 1e-9
    return CheckResult("Gisin-type witness on <I x sx>", ok,
                       f"projection {fig2['trend_break']:.6f} (>1e-3), open {fig1['trend_break']:.2e} (<=1e-9)")


def check_probability_sanity(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        psi0, f1, f2, spec = random_curie_weiss_scenario(rng)
        for alg in measure.ALGORITHMS:
            tab = measure.joint(psi0, f1, f2, spec, alg)
            worst = max(worst, abs(tab.as_array().sum() - 1))
    return CheckResult("probability tables", worst <= 1e-9, f"max |sum - 1| {worst:.2e} over 300 tables")


def check_gradients(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    fs = [hamfun.curie_weiss(rng.uniform(-10, 10)), hamfun.linear_functional(qstate.random_hermitian(rng, 2))]
    worst = 0.0
    for _ in range(20):
        rho = qstate.random_density_matrix(rng, 2)
        for f in fs:
            worst = max(worst, float(np.abs(hamfun.numeric_grad(f, rho, 1e-5) - f.grad(rho)).max()))
    sx2 = hamfun.PsiFunctional(2, lambda p: qstate.expect(p, qstate.SX) ** 2)
    eq19 = hamfun.PsiFunctional(2, lambda p: ((p[0] * p[1] + np.conj(p[1]) * np.conj(p[0])) ** 2).real)
    inv = hamfun.verify_phase_invariance(sx2, 100, seed)
    not_inv = not hamfun.verify_phase_invariance(eq19, 100, seed)
    return CheckResult("gradients and phase invariance", worst <= 1e-6 and inv and not_inv,
                       f"max |numeric - analytic| {worst:.2e}; <sx>^2 invariant={inv}; counterexample rejected={not_inv}")


def check_determinism(seed: int) -> CheckResult:
    cfg = scenario.ExperimentConfig.preset("figure1")
    a = scenario.to_csv(scenario.run(cfg))
    b = scenario.to_csv(scenario.run(cfg))
    return CheckResult("figure1 CSV determinism", a == b, f"{len(a)} bytes, identical={a == b}")


CHECKS = (
    check_conservation,
    check_integrator,
    check_locality,
    check_linear_unanimity,
    check_generalized,
    check_nonlocality_witness,
    check_probability_sanity,
    check_gradients,
    check_determinism,
)


def run_all(seed: int = 0, echo=print) -> bool:
    ok = True
    for check in CHECKS:
        start = time.perf_counter()
        result = check(seed)
        ok &= result.passed
        echo(f"{result.line()} ({time.perf_counter() - start:.1f}s)")
    return ok
