"""Posterior updates, the Thompson sampling rule, and the simulation loop.

Randomness layout: each run owns one generator seeded from
``SeedSequence(seed, spawn_key=(run, attempt))`` and draws a ``(horizon, 3)``
block of uniforms. Column 0 drives the parameter sample, column 1 the reward,
column 2 the transition, so period ``t`` always consumes row ``t`` whatever the
policy or horizon. That is what makes Thompson sampling under a degenerate
prior reproduce the oracle path exactly on a shared stream.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .model import Scenario, categorical_ppf
from .planner import Plan, solve

SAMPLE, REWARD, TRANSITION = 0, 1, 2


@dataclass(frozen=True)
class Oracle:
    """Plays the optimal policy of the true parameter."""


@dataclass(frozen=True)
class Thompson:
    """Samples a parameter from the posterior and plays its optimal control."""


@dataclass(frozen=True)
class FixedControl:
    control: int


PolicyKind = Union[Oracle, Thompson, FixedControl]
ORACLE = Oracle()
THOMPSON = Thompson()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One realized history.

    ``states`` has length T + 1 (the last entry is the terminal state),
    ``beliefs`` has shape (T + 1, n_params) with ``beliefs[t]`` the posterior
    held at the start of period t.
    """

    states: np.ndarray
    samples: np.ndarray
    controls: np.ndarray
    rewards: np.ndarray
    beliefs: np.ndarray

    def __len__(self):
        return len(self.controls)

    @property
    def terminal_state(self) -> int:
        return int(self.states[-1])

    @property
    def steps(self):
        return [
            (int(x), int(th), int(u), float(r))
            for x, th, u, r in zip(self.states[:-1], self.samples, self.controls, self.rewards)
        ]


@dataclass(frozen=True, eq=False)
class TrajectoryBatch(Sequence):
    """Runs stacked along axis 0; indexing yields a Trajectory."""

    states: np.ndarray    # (R, T+1)
    samples: np.ndarray   # (R, T)
    controls: np.ndarray  # (R, T)
    rewards: np.ndarray   # (R, T)
    beliefs: np.ndarray   # (R, T+1, P)
    attempts: int = 0
    accepted: int = 0

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            raise TypeError("slice the arrays directly")
        return Trajectory(self.states[i], self.samples[i], self.controls[i], self.rewards[i], self.beliefs[i])

    @property
    def horizon(self) -> int:
        return self.controls.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 1.0


def _as_2d_belief(b, n_runs):
    b = np.asarray(b, dtype=float)
    return np.broadcast_to(b, (n_runs, b.shape[-1])).copy()


def log_likelihoods(s: Scenario, x, u, r, y) -> np.ndarray:
    """log f^g(r|x,u) + log q^g(y|x,u) for every parameter g; shape (R, n_params)."""
    x, u, y = (np.atleast_1d(np.asarray(a, dtype=int)) for a in (x, u, y))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty((len(x), s.n_params))
    pair = x * s.n_controls + u
    for key in np.unique(pair):
        m = pair == key
        xx, uu = divmod(int(key), s.n_controls)
        s.check_admissible(xx, uu)
        for g in range(s.n_params):
            out[m, g] = s.rewards[(g, xx, uu)].logpdf(r[m])
    with np.errstate(divide="ignore"):
        out += np.log(s.transitions[:, x, u, y]).T
    return out


def _normalize_log(logb: np.ndarray) -> np.ndarray:
    mx = logb.max(axis=-1, keepdims=True)
    if np.any(np.isneginf(mx)):
        raise ValueError("every candidate parameter assigns zero density to the observation")
    w = np.exp(logb - mx)
    return w / w.sum(axis=-1, keepdims=True)


def _update(s: Scenario, belief, x, u, r, y) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logb = np.log(belief)
    return _normalize_log(logb + log_likelihoods(s, x, u, r, y))


def posterior_step(s: Scenario, belief, x: int, u: int, r: float, y: int) -> np.ndarray:
    """Bayes update of ``belief`` after observing reward r and next state y at (x, u)."""
    return _update(s, np.asarray(belief, dtype=float)[None, :], [x], [u], [r], [y])[0]


def batch_posterior(s: Scenario, prior, traj: Trajectory, upto: Optional[int] = None) -> np.ndarray:
    """Posterior after ``upto`` periods computed in one shot from the full history."""
    T = len(traj) if upto is None else upto
    with np.errstate(divide="ignore"):
        logb = np.log(np.asarray(prior, dtype=float))
    if T:
        ll = log_likelihoods(s, traj.states[:T], traj.controls[:T], traj.rewards[:T], traj.states[1 : T + 1])
        logb = logb + ll.sum(axis=0)
    return _normalize_log(logb)


def ts_choose(s: Scenario, belief, policies, x: int, rng: np.random.Generator):
    """Draw a parameter from ``belief`` and return it with its optimal control at x."""
    policies = policies.policies if isinstance(policies, Plan) else np.asarray(policies)
    theta = int(categorical_ppf(np.asarray(belief, dtype=float), rng.random()))
    return theta, int(policies[theta, x])


def _rollout(s: Scenario, kind: PolicyKind, uniforms: np.ndarray, x0, b0, plan: Plan) -> TrajectoryBatch:
    R, T, _ = uniforms.shape
    theta = s.true_param
    states = np.empty((R, T + 1), dtype=int)
    samples = np.empty((R, T), dtype=int)
    controls = np.empty((R, T), dtype=int)
    rewards = np.empty((R, T))
    beliefs = np.empty((R, T + 1, s.n_params))
    x = np.broadcast_to(np.asarray(x0, dtype=int), (R,)).copy()
    b = _as_2d_belief(b0, R)
    for t in range(T):
        states[:, t] = x
        beliefs[:, t] = b
        th = categorical_ppf(b, uniforms[:, t, SAMPLE])
        samples[:, t] = th
        if isinstance(kind, Thompson):
            u = plan.policies[th, x]
        elif isinstance(kind, Oracle):
            u = plan.policies[theta, x]
        elif isinstance(kind, FixedControl):
            if not s.admissible_mask[x, kind.control].all():
                raise ValueError(f"fixed control {kind.control} is inadmissible at a visited state")
            u = np.full(R, kind.control)
        else:
            raise TypeError(f"unknown policy kind {kind!r}")
        r = np.empty(R)
        pair = x * s.n_controls + u
        for key in np.unique(pair):
            m = pair == key
            xx, uu = divmod(int(key), s.n_controls)
            r[m] = s.rewards[(theta, xx, uu)].ppf(uniforms[m, t, REWARD])
        y = categorical_ppf(s.transitions[theta, x, u], uniforms[:, t, TRANSITION])
        controls[:, t] = u
        rewards[:, t] = r
        b = _update(s, b, x, u, r, y)
        x = y
    states[:, T] = x
    beliefs[:, T] = b
    return TrajectoryBatch(states, samples, controls, rewards, beliefs)


def simulate(
    s: Scenario,
    kind: PolicyKind,
    horizon: int,
    rng,
    x0: Optional[int] = None,
    belief0=None,
    plan: Optional[Plan] = None,
) -> Trajectory:
    """Generate one history of ``horizon`` periods; nature always uses the true parameter.

    Per period: record belief, sample a parameter, pick a control, draw the
    reward and the next state, update the belief. Beliefs are updated for
    every policy kind, not just Thompson sampling.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rng = np.random.default_rng(rng)
    plan = plan or solve(s)
    x0 = s.initial_state if x0 is None else x0
    b0 = s.prior if belief0 is None else belief0
    return _rollout(s, kind, rng.random((horizon, 3))[None], x0, b0, plan)[0]


def run_generator(seed: int, run: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, attempt)))


def first_sample_wrong(s: Scenario) -> Callable[[int], bool]:
    return lambda p: p != s.true_param


def run_batch(
    s: Scenario,
    kind: PolicyKind,
    horizon: int,
    n_runs: int,
    seed: int,
    condition: Optional[Callable[[int], bool]] = None,
    max_attempts: int = 1000,
    x0=None,
    belief0=None,
    plan: Optional[Plan] = None,
) -> TrajectoryBatch:
    """Independent runs; run ``i`` is a pure function of ``(seed, i)``.

    With ``condition``, a run is redrawn (attempt 1, 2, ...) until its first
    sampled parameter satisfies the predicate.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    plan = plan or solve(s)
    x0 = s.initial_state if x0 is None else x0
    b0 = _as_2d_belief(s.prior if belief0 is None else belief0, n_runs)
    if condition is not None:
        ok = np.array([condition(p) for p in range(s.n_params)])
        if not np.any(b0[:, ok].sum(axis=1) > 0):
            raise ValueError("condition has zero probability under the initial belief")
    uniforms = np.empty((n_runs, horizon, 3))
    attempts = 0
    for i in range(n_runs):
        for a in range(max_attempts):
            attempts += 1
            block = run_generator(seed, i, a).random((horizon, 3))
            if condition is None or condition(int(categorical_ppf(b0[i], block[0, SAMPLE]))):
                uniforms[i] = block
                break
        else:
            raise RuntimeError(f"run {i}: condition not met after {max_attempts} attempts")
    batch = _rollout(s, kind, uniforms, x0, b0, plan)
    return TrajectoryBatch(
        batch.states, batch.samples, batch.controls, batch.rewards, batch.beliefs,
        attempts=attempts, accepted=n_runs,
    )
