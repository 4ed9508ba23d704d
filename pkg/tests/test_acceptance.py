"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Tolerances and run counts are the stated ones; nothing here is loosened to
make a criterion pass. Run with ``pytest tests/test_acceptance.py -s`` to see
the lines inline; they are also collected in the terminal summary.
"""
import time

import numpy as np
import pytest

from tsmdp.assumptions import DROPPED_FACTOR, check_assumption2, relative_entropy
from tsmdp.planner import DEFAULT_TOL, bellman_backup, solve, td_error_table, value_iteration
from tsmdp.regret import (
    check_proposition1,
    combined_se,
    complete_learning_diagnostic,
    expected_finite_regret,
    expected_residual_regret_mc,
    expected_residual_regret_td,
    frozen_belief_residual_regret,
    lemma4_check,
    posterior_error_curve,
    regret_report,
)
from tsmdp.scenarios import example1, example2, example3
from tsmdp.thompson import ORACLE, THOMPSON, FixedControl, batch_posterior, first_sample_wrong, simulate

from conftest import random_scenario
from test_assumptions import brute_force_joint_kl

pytestmark = pytest.mark.slow

SEED = 20240
BUILTINS = (example1, example2, example3)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_01_closed_form_values(record_criterion):
    with Timer() as clock:
        s = example3()
        V, mu = value_iteration(s, s.true_param, DEFAULT_TOL)
        parts = [abs(V[0] - 8.0) <= 1e-6, s.controls[mu[0]] == "2"]
        gaps = []
        for beta in (0.5, 0.9, 0.99):
            s1 = example1(beta=beta)
            V1, _ = value_iteration(s1, s1.true_param, DEFAULT_TOL)
            gaps.append(abs(V1[0] - beta / (1 - beta)))
        parts.append(max(gaps) <= 1e-6)
    ok = all(parts) and clock.elapsed < 1.0
    record_criterion(1, ok, f"nu^B(x0)={V[0]:.9f} control={s.controls[mu[0]]} max example1 gap={max(gaps):.2e} ({clock.elapsed:.2f}s)")
    assert ok


def test_criterion_02_degenerate_prior_matches_oracle(record_criterion):
    with Timer() as clock:
        same = []
        for make in BUILTINS:
            s = make().with_degenerate_prior()
            ts = simulate(s, THOMPSON, 1000, SEED)
            orc = simulate(s, ORACLE, 1000, SEED)
            same.append(bool(np.array_equal(ts.controls, orc.controls)))
    ok = all(same) and clock.elapsed < 5.0
    record_criterion(2, ok, f"identical actions per scenario={same} ({clock.elapsed:.2f}s)")
    assert ok


def test_criterion_03_example1_finite_regret(record_criterion):
    s = example1(beta=0.9, prior_a=0.5)
    with Timer() as clock:
        rows = []
        for n in (2, 5, 10):
            est = expected_finite_regret(s, n, 100_000, SEED + n)
            closed = (0.9 ** (1 - n) - 1) / 0.1 * 0.5
            rows.append((n, est, closed, est.within(closed, 3)))
    ok = all(r[3] for r in rows) and clock.elapsed < 60
    detail = "; ".join(f"n={n}: {e.mean:.4f}±{e.std_error:.4f} vs {c:.4f}" for n, e, c, _ in rows)
    record_criterion(3, ok, f"{detail} ({clock.elapsed:.1f}s)")
    assert ok


def test_criterion_04_learning_and_residual_bands(record_criterion):
    s = example3()
    cond = first_sample_wrong(s)
    with Timer() as clock:
        curve = posterior_error_curve(s, 41, 10_000, SEED, condition=cond)
        r1 = expected_residual_regret_mc(s, 1, 10_000, SEED, condition=cond)
        r40 = expected_residual_regret_mc(s, 40, 10_000, SEED, condition=cond)
        frozen1 = frozen_belief_residual_regret(s, 1, 10_000, SEED, condition=cond)
    parts = {
        "error(1) in [0.35,0.58]": 0.35 <= curve.error[1] <= 0.58,
        "error(40) < 0.02": curve.error[40] < 0.02,
        "R(1) in [1.7,2.9]": 1.7 <= r1.mean <= 2.9,
        "R(40) < 0.1": r40.mean < 0.1,
    }
    ok = all(parts.values()) and clock.elapsed < 300
    failed = [k for k, v in parts.items() if not v]
    record_criterion(
        4,
        ok,
        f"error(1)={curve.error[1]:.4f} error(40)={curve.error[40]:.5f} R(1)={r1.mean:.4f}±{r1.std_error:.4f} "
        f"R(40)={r40.mean:.4f}±{r40.std_error:.4f} frozen-belief R(1)={frozen1.mean:.4f}; "
        f"failed: {failed or 'none'} ({clock.elapsed:.1f}s)",
    )
    assert ok


def test_criterion_05_decomposition_identity(record_criterion):
    s = example3()
    cond = first_sample_wrong(s)
    with Timer() as clock:
        reps = [regret_report(s, n, 10_000, SEED, condition=cond) for n in (1, 5, 10, 20)]
    gaps = []
    for r in reps:
        se = combined_se(r.finite_time, r.state, r.residual, r.total)
        gaps.append((r.n, abs(r.finite_time.mean + r.state.mean + r.residual.mean - r.total.mean), se))
    ok = all(g <= 3 * se for _, g, se in gaps) and clock.elapsed < 300
    record_criterion(5, ok, "; ".join(f"n={n}: |gap|={g:.2e} 3se={3 * se:.2e}" for n, g, se in gaps) + f" ({clock.elapsed:.1f}s)")
    assert ok


def test_criterion_06_estimator_equivalence(record_criterion):
    s = example3()
    cond = first_sample_wrong(s)
    with Timer() as clock:
        agree = []
        for n in (1, 10, 40):
            mc = expected_residual_regret_mc(s, n, 10_000, SEED, condition=cond)
            td = expected_residual_regret_td(s, n, 10_000, SEED, condition=cond)
            agree.append((n, mc.mean, td.mean, abs(mc.mean - td.mean) <= 3 * combined_se(mc, td)))
        fixed = FixedControl(s.control_index("1"))
        fmc = expected_residual_regret_mc(s, 1, 10_000, SEED, kind=fixed)
        ftd = expected_residual_regret_td(s, 1, 10_000, SEED, kind=fixed)
    fixed_ok = abs(fmc.mean - 5.0) <= 0.05 and abs(ftd.mean - 5.0) <= 0.05
    ok = all(a[3] for a in agree) and fixed_ok and clock.elapsed < 300
    detail = "; ".join(f"n={n}: mc={m:.4f} td={t:.4f}" for n, m, t, _ in agree)
    record_criterion(6, ok, f"{detail}; fixed control 1: mc={fmc.mean:.4f} td={ftd.mean:.4f} ({clock.elapsed:.1f}s)")
    assert ok


def test_criterion_07_residual_nonnegative(record_criterion):
    worst = []
    for make in BUILTINS:
        s = make()
        cond = first_sample_wrong(s)
        for n in (1, 5, 10, 20, 40):
            for est in (
                expected_residual_regret_mc(s, n, 10_000, SEED, condition=cond),
                expected_residual_regret_td(s, n, 10_000, SEED, condition=cond),
            ):
                worst.append((s.name, n, est.mean + 3 * est.std_error + 1e-6))
    # the 1e-6 slack is the analytic truncation bound on the dropped tail
    bad = [(name, n) for name, n, v in worst if v < 0]
    ok = not bad
    record_criterion(7, ok, f"{len(worst)} estimates, min(mean+3se)={min(v for *_, v in worst):.2e}, negatives={bad}")
    assert ok


def test_criterion_08_exponential_bound_shape(record_criterion):
    s = example3()
    cond = first_sample_wrong(s)
    curve = posterior_error_curve(s, 60, 10_000, SEED, condition=cond)
    pairs = [(n, expected_residual_regret_mc(s, n, 10_000, SEED, condition=cond)) for n in (1, 5, 10, 20, 40)]
    check = check_proposition1(s, curve, pairs)
    ok = curve.fit_ok and curve.fitted_b > 0 and check.all_passed
    record_criterion(8, ok, f"fitted a={curve.fitted_a:.4f} b={curve.fitted_b:.4f}; failing n={check.failing}")
    assert ok


def test_criterion_09_relative_entropy(record_criterion):
    with Timer() as clock:
        s = example3()
        th, g = s.true_param, 1 - s.true_param
        k2 = relative_entropy(s, 0, s.control_index("2"), th, g)
        k1 = relative_entropy(s, 0, s.control_index("1"), th, g)
        p2 = relative_entropy(s, 0, s.control_index("2"), th, g, convention=DROPPED_FACTOR)
        p1 = relative_entropy(s, 0, s.control_index("1"), th, g, convention=DROPPED_FACTOR)
        sat3 = check_assumption2(s).satisfied
        sat1 = check_assumption2(example1()).satisfied
    parts = [abs(k2 - 0.8) <= 1e-4, abs(k1 - 0.2) <= 1e-4, abs(p2 - 0.16) <= 1e-4, abs(p1 - 0.04) <= 1e-4, sat3, not sat1]
    ok = all(parts) and clock.elapsed < 1.0
    record_criterion(
        9, ok,
        f"K(2)={k2:.6f} K(1)={k1:.6f} dropped-factor {p2:.6f}/{p1:.6f} example3 satisfied={sat3} example1 satisfied={sat1} ({clock.elapsed:.2f}s)",
    )
    assert ok


def test_criterion_10_lemma4_bound(record_criterion):
    s = example3()
    with Timer() as clock:
        chk = lemma4_check(s, 60, 10_000, SEED, condition=first_sample_wrong(s))
    have = chk.counts > 0
    ok = abs(chk.bound + 30.4) < 1e-5 and chk.all_passed and clock.elapsed < 120
    record_criterion(
        10, ok,
        f"bound={chk.bound:.4f} min mean phi={np.nanmin(chk.mean_phi[have]):.4f} periods with wrong samples={int(have.sum())} ({clock.elapsed:.1f}s)",
    )
    assert ok


def test_criterion_11_complete_learning(record_criterion):
    d3 = complete_learning_diagnostic(example3(), 200, 1000, SEED)
    d1 = complete_learning_diagnostic(example1(), 200, 1000, SEED)
    parts = {
        "example3 >= 0.99": d3.fraction >= 0.99,
        "example1 strictly smaller than 1": d1.fraction < 1.0,
        "example1 flagged": d1.flagged,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    record_criterion(
        11, ok,
        f"example3 fraction={d3.fraction:.3f}; example1 fraction={d1.fraction:.3f} min belief={d1.min_belief:.3g} "
        f"flagged={d1.flagged}; failed: {failed or 'none'}",
    )
    assert ok


def test_criterion_12_property_suites(record_criterion):
    rng = np.random.default_rng(SEED)
    results = {"posterior": True, "normalization": True, "contraction": True, "phi": True, "kl": True}
    for i in range(40):
        s = random_scenario(np.random.default_rng(rng.integers(2**31)), n_params=3)
        tr = simulate(s, THOMPSON, 60, i)
        for t in (0, 1, 30, 60):
            results["posterior"] &= np.max(np.abs(tr.beliefs[t] - batch_posterior(s, s.prior, tr, upto=t))) <= 1e-9
        results["normalization"] &= bool(np.all(tr.beliefs >= 0)) and np.max(np.abs(tr.beliefs.sum(axis=1) - 1)) <= 1e-12
        plan = solve(s)
        V, W = rng.normal(scale=10, size=(2, s.n_states))
        for p in range(s.n_params):
            lhs = np.max(np.abs(bellman_backup(s, p, V) - bellman_backup(s, p, W)))
            results["contraction"] &= lhs <= s.beta * np.max(np.abs(V - W)) + 1e-12
            phi = td_error_table(s, p, plan.values[p])
            opt = phi[np.arange(s.n_states), plan.policies[p]]
            results["phi"] &= np.nanmax(phi) <= 2 * DEFAULT_TOL and np.all(np.abs(opt) <= 2 * DEFAULT_TOL)
        for x, us in enumerate(s.admissible):
            for u in us:
                for p in range(3):
                    for g in range(3):
                        if p != g:
                            k = relative_entropy(s, x, u, p, g)
                            results["kl"] &= k >= 0 and abs(k - brute_force_joint_kl(s, x, u, p, g)) <= 1e-9
    results = {k: bool(v) for k, v in results.items()}
    ok = all(results.values())
    record_criterion(12, ok, f"40 random scenarios: {results}")
    assert ok
