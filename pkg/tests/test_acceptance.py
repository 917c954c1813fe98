"""Acceptance suite: one PASS/FAIL line per criterion.

Run ``python3 tests/test_acceptance.py`` for the summary lines alone, or
``pytest tests/test_acceptance.py -s`` to see them inside pytest.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import I2, SX, SZ, Z0, curie_weiss_oracle, heisenberg_joint, mean  # noqa: E402
from nlcorr import cli, dynamics, hamfun, measure, qstate, scenario  # noqa: E402
from nlcorr.checks import random_curie_weiss_scenario  # noqa: E402
from nlcorr.dynamics import DetectionSchedule  # noqa: E402

# IX trend break of the projection-standard mixture on the reference scenario,
# frozen from the first verified run and reproduced by an independent expm script
GOLDEN_TREND_BREAK = 0.1897924621707967
SEED = 20240101


def reference():
    return qstate.vi_c_state(), hamfun.curie_weiss(8.0), hamfun.curie_weiss(0.5), DetectionSchedule(3.5, 8.0)


def criterion_1():
    psi, f1, f2, sched = reference()
    times = np.linspace(0, 10, 1001)
    zi, iz = np.kron(SZ, I2), np.kron(I2, SZ)

    def worst(states):
        return max(max(abs(mean(s, zi) + Z0), abs(mean(s, iz) - Z0)) for s in states)

    cf = worst(dynamics.closed_form(psi, f1, f2, sched, 10.0, times).trajectory.states)
    rk = worst(dynamics.evolve_open(psi, f1, f2, sched, 10.0, 1e-3, times).trajectory.states)
    return cf <= 1e-12 and rk <= 1e-8, f"closed form {cf:.2e} (<=1e-12), RK4 {rk:.2e} (<=1e-8)"


def criterion_2():
    psi, f1, f2, sched = reference()
    times = np.linspace(0, 10, 1001)
    closed = dynamics.closed_form(psi, f1, f2, sched, 10.0, times).trajectory.states
    oracle = np.array([curie_weiss_oracle(psi, 8, 0.5, 3.5, 8, t) for t in times])
    closed_vs_oracle = float(np.linalg.norm(closed - oracle, axis=1).max())

    def err(dt):
        rk = dynamics.evolve_open(psi, f1, f2, sched, 10.0, dt, times).trajectory.states
        return float(np.linalg.norm(rk - closed, axis=1).max())

    fine = err(1e-3)
    e = [err(dt) for dt in (1e-2, 5e-3, 2.5e-3)]
    ratios = [e[0] / e[1], e[1] / e[2]]
    ok = fine <= 1e-6 and min(ratios) >= 10 and closed_vs_oracle <= 1e-12
    return ok, (f"max error {fine:.2e} at dt=1e-3 (<=1e-6); halving ratios {ratios[0]:.2f}, {ratios[1]:.2f} (>=10); "
                f"closed form vs expm {closed_vs_oracle:.1e}")


def criterion_3():
    base = scenario.ExperimentConfig.preset("vi_c")
    report = scenario.locality_audit(base, [{"B": 5.0}, {"t2": 2.0}, {"axis2": "z"}], target=1)
    devs = ", ".join(f"{list(e.perturbation.items())[0][0]}: {e.deviation:.1e}" for e in report.entries)
    return report.passed, f"particle-1 deviations {devs} (<=1e-9)"


def criterion_4():
    rng = np.random.default_rng(SEED)
    psi = qstate.bell_singlet()
    f1, f2 = hamfun.linear_functional(SZ), hamfun.linear_functional(SX)
    worst = 0.0
    for _ in range(10):
        t1, t2 = rng.uniform(0, 5, size=2)
        a1, a2 = (qstate.bloch_axis(rng.normal(size=3), normalize=True) for _ in range(2))
        spec = measure.JointSpec(a1, a2, DetectionSchedule(t1, t2))
        tables = [measure.joint(psi, f1, f2, spec, alg).as_array() for alg in measure.ALGORITHMS]
        sign = {"+": 1, "-": -1}
        tables.append(np.array([heisenberg_joint(psi, SZ, SX, a1, a2, t1, t2, sign[a], sign[b])
                                for a, b in measure.PAIRS]))
        for i in range(len(tables)):
            for j in range(i):
                worst = max(worst, float(np.abs(tables[i] - tables[j]).max()))
    return worst <= 1e-9, f"max pairwise disagreement {worst:.2e} over 10 schedules (<=1e-9)"


def criterion_5():
    rng = np.random.default_rng(SEED)
    psi, f1, f2, sched = reference()
    cases = [(psi, f1, f2, measure.JointSpec("x", "x", sched))]
    cases += [random_curie_weiss_scenario(rng) for _ in range(20)]
    worst = 0.0
    for psi0, g1, g2, spec in cases:
        opn = measure.joint_open(psi0, g1, g2, spec, engine="closed_form").as_array()
        gen = measure.joint_projection_generalized(psi0, g1, g2, spec, engine="integrator").as_array()
        worst = max(worst, float(np.abs(opn - gen).max()))
    return worst <= 1e-6, f"max |generalized(RK4) - open(closed form)| {worst:.2e} over 21 scenarios (<=1e-6)"


def criterion_6():
    fig2 = scenario.measurement_footprint(scenario.ExperimentConfig.preset("figure2"))
    fig1 = scenario.measurement_footprint(scenario.ExperimentConfig.preset("figure1"))
    golden = abs(fig2["trend_break"] - GOLDEN_TREND_BREAK)
    ok = fig2["trend_break"] > 1e-3 and fig1["trend_break"] <= 1e-9 and fig1["value_jump"] <= 1e-9 and golden <= 1e-9
    return ok, (f"projection trend break {fig2['trend_break']:.16g} (>1e-3, golden diff {golden:.1e}); "
                f"open {fig1['trend_break']:.1e} (<=1e-9); "
                f"info: right-minus-left value at t1 is {fig2['value_jump']:.1e} (projection), "
                f"{fig1['value_jump']:.1e} (open)")


def criterion_7():
    rng = np.random.default_rng(SEED)
    worst_sum = worst_marg = 0.0
    in_range = True
    for _ in range(100):
        psi, f1, f2, spec = random_curie_weiss_scenario(rng)
        for alg in measure.ALGORITHMS:
            tab = measure.joint(psi, f1, f2, spec, alg)
            worst_sum = max(worst_sum, abs(sum(tab.p_joint.values()) - 1))
            in_range &= all(0.0 <= p <= 1.0 for p in (*tab.p_joint.values(), *tab.p_marg1.values(),
                                                        *tab.p_marg2.values()))
            for s in measure.SIGNS:
                worst_marg = max(worst_marg,
                                 abs(tab.p_marg1[s] - tab.p_joint[s, "+"] - tab.p_joint[s, "-"]),
                                 abs(tab.p_marg2[s] - tab.p_joint["+", s] - tab.p_joint["-", s]))
    ok = worst_sum <= 1e-9 and worst_marg <= 1e-9 and in_range
    return ok, f"300 tables: max |sum-1| {worst_sum:.1e}, max marginal mismatch {worst_marg:.1e}, in [0,1]: {in_range}"


def criterion_8():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        rho = qstate.random_density_matrix(rng, 2)
        for f in (hamfun.curie_weiss(rng.uniform(-10, 10)), hamfun.linear_functional(qstate.random_hermitian(rng, 2))):
            worst = max(worst, float(np.abs(hamfun.numeric_grad(f, rho, 1e-5) - f.grad(rho)).max()))
    sx2 = hamfun.PsiFunctional(2, lambda p: qstate.expect(p, qstate.SX) ** 2)
    counter = hamfun.PsiFunctional(2, lambda p: ((p[0] * p[1] + np.conj(p[1]) * np.conj(p[0])) ** 2).real)
    inv = hamfun.verify_phase_invariance(sx2, 100, SEED)
    rejected = not hamfun.verify_phase_invariance(counter, 100, SEED)
    ok = worst <= 1e-6 and inv and rejected
    return ok, f"max |numeric - analytic| {worst:.1e} (<=1e-6); <sx>^2 invariant: {inv}; counterexample rejected: {rejected}"


def criterion_9(tmp_dir):
    a, b = Path(tmp_dir) / "fig1_a.csv", Path(tmp_dir) / "fig1_b.csv"
    codes = (cli.main(["figure1", "--out", str(a)]), cli.main(["figure1", "--out", str(b)]))
    same = a.read_bytes() == b.read_bytes()
    return codes == (0, 0) and same, f"exit codes {codes}, {a.stat().st_size} bytes, identical: {same}"


CRITERIA = {
    1: ("conservation of <sz>", criterion_1),
    2: ("closed form vs RK4", criterion_2),
    3: ("locality audit", criterion_3),
    4: ("linear-case unanimity", criterion_4),
    5: ("generalized projection == open", criterion_5),
    6: ("nonlocality witness", criterion_6),
    7: ("probability sanity", criterion_7),
    8: ("gradient correctness", criterion_8),
    9: ("determinism", criterion_9),
}


def report(n, tmp_dir=None):
    name, fn = CRITERIA[n]
    start = time.perf_counter()
    ok, detail = fn(tmp_dir) if n == 9 else fn()
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n} ({name}): {detail} [{time.perf_counter() - start:.1f}s]")
    return ok


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, tmp_path):
    assert report(n, tmp_path)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        results = [report(n, d) for n in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
