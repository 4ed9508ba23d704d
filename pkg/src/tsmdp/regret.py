"""Monte-Carlo estimates of the regret decomposition and learning diagnostics.

Infinite sums are truncated after ``horizon_for(beta, M, eps)`` periods; the
dropped tail is at most beta**T * M / (1 - beta) < eps (1e-6 by default).
Oracle and Thompson batches built from the same seed share their random
numbers run by run, so paired differences have small variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .assumptions import check_assumption2, lemma4_bound
from .model import Scenario, reward_bound
from .planner import solve, td_error_table
from .thompson import (
    ORACLE,
    THOMPSON,
    PolicyKind,
    Trajectory,
    TrajectoryBatch,
    run_batch,
)

EPS_TAIL = 1e-6


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n: int

    @classmethod
    def from_samples(cls, x) -> "MCEstimate":
        x = np.asarray(x, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        return cls(float(x.mean()), se, len(x))

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error

    def __str__(self):
        return f"{self.mean:.6g} ± {self.std_error:.2g} (n={self.n})"


def combined_se(*estimates: MCEstimate) -> float:
    return math.sqrt(sum(e.std_error**2 for e in estimates))


def discounted_return(traj: Trajectory, from_n: int, beta: float) -> float:
    """sum_{t >= from_n} beta^(t - from_n) r_t over the recorded horizon."""
    T = len(traj)
    if from_n >= T or from_n < 0:
        raise ValueError(f"from_n={from_n} outside trajectory of length {T}")
    return float(_returns(np.asarray(traj.rewards)[None], from_n, beta)[0])


def _returns(rewards: np.ndarray, from_n: int, beta: float, to: Optional[int] = None) -> np.ndarray:
    seg = rewards[:, from_n:to]
    return seg @ (beta ** np.arange(seg.shape[1]))


def horizon_for(beta: float, M: float, eps: float) -> int:
    """Smallest T >= 1 with beta^T * M / (1 - beta) < eps."""
    if eps <= 0 or not 0 <= beta < 1:
        raise ValueError("need eps > 0 and 0 <= beta < 1")
    if beta == 0 or M == 0:
        return 1
    T = max(1, math.ceil(math.log(eps * (1 - beta) / M) / math.log(beta)))
    while beta**T * M / (1 - beta) >= eps:
        T += 1
    while T > 1 and beta ** (T - 1) * M / (1 - beta) < eps:
        T -= 1
    return T


def tail_horizon(s: Scenario, eps: float = EPS_TAIL) -> int:
    return horizon_for(s.beta, reward_bound(s), eps)


def estimate_value(
    s: Scenario, kind: PolicyKind, n: int, runs: int, seed: int, condition=None, eps: float = EPS_TAIL
) -> MCEstimate:
    """V(n): expected discounted reward from period n on, in period-n units."""
    if runs < 2:
        raise ValueError("runs must be at least 2")
    batch = run_batch(s, kind, n + tail_horizon(s, eps), runs, seed, condition=condition)
    return MCEstimate.from_samples(_returns(batch.rewards, n, s.beta))


def expected_finite_regret(s: Scenario, n: int, runs: int, seed: int, condition=None) -> MCEstimate:
    """(oracle - TS) discounted reward over periods 0..n-1, times beta^-n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    oracle = run_batch(s, ORACLE, n, runs, seed, condition=condition)
    ts = run_batch(s, THOMPSON, n, runs, seed, condition=condition)
    return MCEstimate.from_samples(_finite_regret_samples(s, oracle, ts, n))


def _finite_regret_samples(s, oracle, ts, n):
    disc = s.beta ** np.arange(n)
    gap = (oracle.rewards[:, :n] - ts.rewards[:, :n]) @ disc
    return gap * s.beta ** (-n)


def _nu_at(s: Scenario, batch: TrajectoryBatch, n: int) -> np.ndarray:
    return solve(s).values[s.true_param][batch.states[:, n]]


def expected_state_regret(s: Scenario, n: int, runs: int, seed: int, condition=None) -> MCEstimate:
    """E[nu(X_n)] under the oracle minus E[nu(X_n)] under Thompson sampling."""
    oracle = run_batch(s, ORACLE, max(n, 1), runs, seed, condition=condition)
    ts = run_batch(s, THOMPSON, max(n, 1), runs, seed, condition=condition)
    return MCEstimate.from_samples(_nu_at(s, oracle, n) - _nu_at(s, ts, n))


def expected_residual_regret_mc(
    s: Scenario, n: int, runs: int, seed: int, kind: PolicyKind = THOMPSON, condition=None, eps: float = EPS_TAIL
) -> MCEstimate:
    """Paired per-run nu(X_n) - sum_{t>=n} beta^(t-n) R_t."""
    batch = run_batch(s, kind, n + tail_horizon(s, eps), runs, seed, condition=condition)
    return MCEstimate.from_samples(_residual_mc_samples(s, batch, n))


def _residual_mc_samples(s, batch, n):
    return _nu_at(s, batch, n) - _returns(batch.rewards, n, s.beta)


def expected_residual_regret_td(
    s: Scenario, n: int, runs: int, seed: int, kind: PolicyKind = THOMPSON, condition=None, eps: float = EPS_TAIL
) -> MCEstimate:
    """-sum_{t>=n} beta^(t-n) phi(X_t, U_t), averaged over runs."""
    batch = run_batch(s, kind, n + tail_horizon(s, eps), runs, seed, condition=condition)
    return MCEstimate.from_samples(_residual_td_samples(s, batch, n))


def _phi_path(s: Scenario, batch: TrajectoryBatch) -> np.ndarray:
    plan = solve(s)
    phi = td_error_table(s, s.true_param, plan.values[s.true_param])
    return phi[batch.states[:, :-1], batch.controls]


def _residual_td_samples(s, batch, n):
    return -_returns(_phi_path(s, batch), n, s.beta)


def frozen_belief_residual_regret(
    s: Scenario, n: int, runs: int, seed: int, condition=None, eps: float = EPS_TAIL
) -> MCEstimate:
    """nu(X_n) minus the value of committing forever to mu^g with g ~ pi_n.

    This ignores learning after period n, so it upper-bounds the residual
    regret whenever beliefs keep concentrating. On the single-state example it
    equals 0.5 / (1 - beta) * E[pi_n(A)], the shortcut behind the published
    residual-regret curve.
    """
    batch = run_batch(s, THOMPSON, max(n, 1), runs, seed, condition=condition)
    committed = policy_values(s)  # (n_params, n_states): value under theta of playing mu^g
    x_n = batch.states[:, n]
    b_n = batch.beliefs[:, n]
    continuation = (b_n * committed[:, x_n].T).sum(axis=1)
    return MCEstimate.from_samples(_nu_at(s, batch, n) - continuation)


def policy_values(s: Scenario) -> np.ndarray:
    """Value, under the true parameter, of following mu^g forever, for every g."""
    plan = solve(s)
    th = s.true_param
    X = np.arange(s.n_states)
    out = np.empty((s.n_params, s.n_states))
    for g in range(s.n_params):
        mu = plan.policies[g]
        r = s.reward_table[th, X, mu]
        Q = s.transitions[th, X, mu]
        out[g] = np.linalg.solve(np.eye(s.n_states) - s.beta * Q, r)
    return out


@dataclass(frozen=True)
class RegretReport:
    n: int
    finite_time: MCEstimate
    state: MCEstimate
    residual: MCEstimate
    total: MCEstimate
    residual_td: MCEstimate
    identity_gap: MCEstimate  # finite + state + residual - total, paired per run

    def identity_holds(self, k: float = 3.0, atol: float = EPS_TAIL) -> bool:
        """Gap within k standard errors, plus ``atol`` for the truncated tail and planner tolerance."""
        return abs(self.identity_gap.mean) <= k * self.identity_gap.std_error + atol


def regret_report(s: Scenario, n: int, runs: int, seed: int, condition=None, eps: float = EPS_TAIL) -> RegretReport:
    """All decomposition terms at period n from one oracle and one Thompson batch (paired seeds)."""
    T = n + tail_horizon(s, eps)
    oracle = run_batch(s, ORACLE, max(n, 1), runs, seed, condition=condition)
    ts = run_batch(s, THOMPSON, T, runs, seed, condition=condition)
    nu0 = solve(s).values[s.true_param][s.initial_state]
    fin = _finite_regret_samples(s, oracle, ts, n) if n >= 1 else np.zeros(runs)
    state = _nu_at(s, oracle, n) - _nu_at(s, ts, n)
    res = _residual_mc_samples(s, ts, n)
    res_td = _residual_td_samples(s, ts, n)
    total = (nu0 - _returns(ts.rewards, 0, s.beta)) * s.beta ** (-n)
    est = MCEstimate.from_samples
    return RegretReport(n, est(fin), est(state), est(res), est(total), est(res_td), est(fin + state + res - total))


@dataclass(frozen=True)
class LearningCurve:
    periods: np.ndarray
    error: np.ndarray
    std_error: np.ndarray
    fitted_a: float = math.nan
    fitted_b: float = math.nan

    @property
    def fit_ok(self) -> bool:
        return math.isfinite(self.fitted_a) and math.isfinite(self.fitted_b)

    def fitted(self, t) -> np.ndarray:
        return self.fitted_a * np.exp(-self.fitted_b * np.asarray(t, dtype=float))


def fit_exponential(periods, error, floor: float = 1e-10, min_points: int = 5) -> tuple[float, float]:
    """Least-squares fit of log(error) = log a - b t; NaNs when too few usable points."""
    periods = np.asarray(periods, dtype=float)
    error = np.asarray(error, dtype=float)
    use = error > floor
    if use.sum() < min_points:
        return math.nan, math.nan
    slope, intercept = np.polyfit(periods[use], np.log(error[use]), 1)
    return float(math.exp(intercept)), float(-slope)


def posterior_error_curve(s: Scenario, horizon: int, runs: int, seed: int, condition=None) -> LearningCurve:
    """Per-period mean of 1 - pi_t(theta | H_t) under Thompson sampling, with an exponential fit."""
    if runs < 10:
        raise ValueError("runs must be at least 10")
    batch = run_batch(s, THOMPSON, horizon, runs, seed, condition=condition)
    return _curve_from_batch(s, batch)


def _curve_from_batch(s: Scenario, batch: TrajectoryBatch) -> LearningCurve:
    err = 1.0 - batch.beliefs[:, :, s.true_param]
    mean = err.mean(axis=0)
    se = err.std(axis=0, ddof=1) / math.sqrt(len(batch))
    periods = np.arange(err.shape[1])
    a, b = fit_exponential(periods, mean)
    return LearningCurve(periods, mean, se, a, b)


def proposition1_bound(s: Scenario, a: float, b: float, n) -> np.ndarray:
    M = reward_bound(s)
    return 2 * M * (1 + s.beta) * a * np.exp(-b * np.asarray(n, dtype=float)) / (1 - s.beta) ** 2


@dataclass(frozen=True)
class BoundCheck:
    n: list
    estimates: list
    bounds: list
    passed: list

    @property
    def all_passed(self) -> bool:
        return all(self.passed)

    @property
    def failing(self) -> list:
        return [n for n, ok in zip(self.n, self.passed) if not ok]


def check_proposition1(s: Scenario, curve: LearningCurve, reports: Iterable, k: float = 3.0) -> BoundCheck:
    """Residual regret at each n against 2M(1+beta) a e^{-bn} / (1-beta)^2 + k standard errors.

    ``reports`` holds RegretReport objects or (n, MCEstimate) pairs. The
    constants a, b come from the fitted posterior-error curve.
    """
    if not curve.fit_ok:
        raise ValueError("learning curve has no exponential fit")
    ns, ests = [], []
    for r in reports:
        if isinstance(r, RegretReport):
            ns.append(r.n)
            ests.append(r.residual)
        else:
            ns.append(int(r[0]))
            ests.append(r[1])
    bounds = [float(v) for v in proposition1_bound(s, curve.fitted_a, curve.fitted_b, ns)]
    passed = [e.mean <= bd + k * e.std_error for e, bd in zip(ests, bounds)]
    return BoundCheck(ns, ests, bounds, passed)


@dataclass(frozen=True)
class Lemma4Check:
    periods: np.ndarray
    mean_phi: np.ndarray   # NaN where no run had a wrong sample
    std_error: np.ndarray
    counts: np.ndarray
    bound: float

    @property
    def passed(self) -> np.ndarray:
        have = self.counts > 0
        ok = np.ones_like(have)
        ok[have] = self.mean_phi[have] >= self.bound - 3 * self.std_error[have]
        return ok

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())


def lemma4_check(s: Scenario, horizon: int, runs: int, seed: int, condition=None) -> Lemma4Check:
    """Mean TD error over runs whose period-t sample is wrong, against the constant -2M(1+beta)/(1-beta)."""
    batch = run_batch(s, THOMPSON, horizon, runs, seed, condition=condition)
    phi = _phi_path(s, batch)
    wrong = batch.samples != s.true_param
    counts = wrong.sum(axis=0)
    mean = np.full(horizon, np.nan)
    se = np.zeros(horizon)
    for t in range(horizon):
        v = phi[wrong[:, t], t]
        if len(v):
            mean[t] = v.mean()
            se[t] = v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else 0.0
    return Lemma4Check(np.arange(horizon), mean, se, counts, lemma4_bound(s))


def probabilistic_residual_regret(
    s: Scenario, prefix: Trajectory, inner_runs: int, seed: int, eps: float = EPS_TAIL, route: str = "mc"
) -> MCEstimate:
    """nu(X_n) minus the nested Monte-Carlo value of continuing Thompson sampling from the prefix.

    The continuation restarts from the prefix's terminal state and posterior;
    those two are sufficient because the likelihood factorizes over periods.
    ``route="td"`` scores each continuation by -sum beta^t phi instead of
    nu - return; same conditional mean, far less noise once beliefs settle.
    """
    x_n = prefix.terminal_state
    cont = run_batch(
        s, THOMPSON, tail_horizon(s, eps), inner_runs, seed, x0=x_n, belief0=prefix.beliefs[-1]
    )
    return MCEstimate.from_samples(_continuation_scores(s, cont, route))


def _continuation_scores(s: Scenario, cont: TrajectoryBatch, route: str) -> np.ndarray:
    if route == "mc":
        return _residual_mc_samples(s, cont, 0)
    if route == "td":
        return _residual_td_samples(s, cont, 0)
    raise ValueError(f"unknown route {route!r}; expected 'mc' or 'td'")


def probabilistic_residual_regret_batch(
    s: Scenario, prefixes: TrajectoryBatch, inner_runs: int, seed: int, eps: float = EPS_TAIL, route: str = "mc"
) -> np.ndarray:
    """Nested estimate for every prefix in a batch; one vectorized continuation run."""
    R = len(prefixes)
    x_n = np.repeat(prefixes.states[:, -1], inner_runs)
    b_n = np.repeat(prefixes.beliefs[:, -1], inner_runs, axis=0)
    cont = run_batch(s, THOMPSON, tail_horizon(s, eps), R * inner_runs, seed, x0=x_n, belief0=b_n)
    return _continuation_scores(s, cont, route).reshape(R, inner_runs).mean(axis=1)


@dataclass(frozen=True)
class LearningDiagnostic:
    fraction: float
    min_belief: float
    runs: int
    assumption_satisfied: bool
    violations: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return not self.assumption_satisfied


def complete_learning_diagnostic(
    s: Scenario, horizon: int, runs: int, seed: int, eps: float = 1e-3
) -> LearningDiagnostic:
    """Fraction of Thompson runs whose final belief on the true parameter exceeds 1 - eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    batch = run_batch(s, THOMPSON, horizon, runs, seed)
    final = batch.beliefs[:, -1, s.true_param]
    rep = check_assumption2(s)
    return LearningDiagnostic(float(np.mean(final > 1 - eps)), float(final.min()), runs, rep.satisfied, rep.violations)
