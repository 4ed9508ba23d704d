"""Finite parametrized MDPs: reward/transition models, scenarios, validation.

Everything here is immutable once built. Densities are handled in log-space;
a scenario's likelihood over a few hundred periods underflows otherwise.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Union

import numpy as np
from scipy import special

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Categorical:
    """Reward distribution on a finite set of atoms."""

    support: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(float(v) for v in self.support))
        object.__setattr__(self, "probs", tuple(float(v) for v in self.probs))

    @property
    def lo(self) -> float:
        return min(self.support)

    @property
    def hi(self) -> float:
        return max(self.support)

    def expected_value(self) -> float:
        return float(np.dot(self.support, self.probs))

    def ppf(self, u):
        """Inverse CDF; atoms with zero probability are never returned."""
        cdf = np.cumsum(self.probs)
        cdf /= cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        idx = np.minimum(idx, len(cdf) - 1)
        return np.asarray(self.support)[idx]

    def _atom_index(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        sup = np.asarray(self.support)
        match = np.isclose(r[:, None], sup[None, :], rtol=0.0, atol=PROB_TOL)
        if not match.any(axis=1).all():
            bad = r[~match.any(axis=1)][0]
            raise ValueError(f"reward {bad!r} is not an atom of the support {self.support}")
        return match.argmax(axis=1)

    def logpdf(self, r):
        idx = self._atom_index(r)
        with np.errstate(divide="ignore"):
            out = np.log(np.asarray(self.probs))[idx]
        return out if np.ndim(r) else float(out[0])

    def density_floor(self) -> float:
        return min(self.probs)

    def to_dict(self) -> dict:
        return {"type": "Categorical", "support": list(self.support), "probs": list(self.probs)}


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian N(mu, variance) restricted to [lo, hi] and renormalized."""

    mu: float
    variance: float
    lo: float
    hi: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @cached_property
    def _std_bounds(self) -> tuple[float, float]:
        return (self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma

    @cached_property
    def mass(self) -> float:
        a, b = self._std_bounds
        return float(special.ndtr(b) - special.ndtr(a))

    def expected_value(self) -> float:
        a, b = self._std_bounds
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        return self.mu + self.sigma * (phi(a) - phi(b)) / self.mass

    def ppf(self, u):
        a, b = self._std_bounds
        lo_c, hi_c = special.ndtr(a), special.ndtr(b)
        z = special.ndtri(lo_c + np.asarray(u) * (hi_c - lo_c))
        return np.clip(self.mu + self.sigma * z, self.lo, self.hi)

    def logpdf(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any((r_arr < self.lo) | (r_arr > self.hi)):
            raise ValueError(f"reward outside truncation interval [{self.lo}, {self.hi}]")
        z = (r_arr - self.mu) / self.sigma
        out = -0.5 * z * z - 0.5 * math.log(2 * math.pi * self.variance) - math.log(self.mass)
        return out if np.ndim(r) else float(out)

    def density_floor(self) -> float:
        # unimodal: the minimum over [lo, hi] sits at an endpoint
        return float(np.exp(min(self.logpdf(self.lo), self.logpdf(self.hi))))

    def to_dict(self) -> dict:
        return {
            "type": "TruncatedGaussian",
            "mean": self.mu,
            "variance": self.variance,
            "lo": self.lo,
            "hi": self.hi,
        }


RewardModel = Union[Categorical, TruncatedGaussian]


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scenario:
    """A theta-MDP instance over finite state, control and parameter sets.

    ``transitions`` has shape (n_params, n_states, n_controls, n_states); rows of
    inadmissible (state, control) pairs are ignored. ``rewards`` maps
    (param, state, control) to a reward model for every admissible pair.
    """

    states: tuple[str, ...]
    controls: tuple[str, ...]
    params: tuple[str, ...]
    admissible: tuple[tuple[int, ...], ...]
    rewards: Mapping[tuple[int, int, int], RewardModel]
    transitions: np.ndarray
    beta: float
    prior: np.ndarray
    true_param: int
    initial_state: int = 0
    degenerate_prior: bool = False
    name: str = "custom"
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "admissible", tuple(tuple(int(u) for u in a) for a in self.admissible))
        object.__setattr__(self, "rewards", dict(self.rewards))
        object.__setattr__(self, "transitions", _frozen(self.transitions))
        object.__setattr__(self, "prior", _frozen(self.prior))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def state_index(self, label: str) -> int:
        return self.states.index(label)

    def control_index(self, label: str) -> int:
        return self.controls.index(label)

    def param_index(self, label: str) -> int:
        return self.params.index(label)

    def is_admissible(self, x: int, u: int) -> bool:
        return 0 <= x < self.n_states and u in self.admissible[x]

    def check_admissible(self, x: int, u: int) -> None:
        if not self.is_admissible(x, u):
            raise ValueError(f"control {u} is not admissible at state {x}")

    def replace(self, **changes) -> "Scenario":
        changes.setdefault("_cache", {})
        return dataclasses.replace(self, **changes)

    def with_beta(self, beta: float) -> "Scenario":
        return self.replace(beta=beta)

    def with_prior(self, prior, degenerate: bool | None = None) -> "Scenario":
        prior = np.asarray(prior, dtype=float)
        if degenerate is None:
            degenerate = bool(np.any(prior == 0))
        return self.replace(prior=prior, degenerate_prior=degenerate)

    def with_degenerate_prior(self, param: int | None = None) -> "Scenario":
        p = self.true_param if param is None else param
        prior = np.zeros(self.n_params)
        prior[p] = 1.0
        return self.with_prior(prior, degenerate=True)

    @property
    def admissible_mask(self) -> np.ndarray:
        if "mask" not in self._cache:
            mask = np.zeros((self.n_states, self.n_controls), dtype=bool)
            for x, us in enumerate(self.admissible):
                mask[x, list(us)] = True
            mask.setflags(write=False)
            self._cache["mask"] = mask
        return self._cache["mask"]

    @property
    def reward_table(self) -> np.ndarray:
        """Expected rewards, shape (n_params, n_states, n_controls); NaN where inadmissible."""
        if "rtab" not in self._cache:
            tab = np.full((self.n_params, self.n_states, self.n_controls), np.nan)
            for (p, x, u), model in self.rewards.items():
                if self.is_admissible(x, u):
                    tab[p, x, u] = model.expected_value()
            tab.setflags(write=False)
            self._cache["rtab"] = tab
        return self._cache["rtab"]


def validate_scenario(s: Scenario) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    out = []
    P, X, U = s.n_params, s.n_states, s.n_controls
    if P < 1:
        out.append("parameter set is empty")
    if X < 1 or U < 1:
        out.append("state and control sets must be non-empty")
    if len(s.admissible) != X:
        out.append(f"admissible has {len(s.admissible)} entries for {X} states")
    if s.transitions.shape != (P, X, U, X):
        out.append(f"transitions has shape {s.transitions.shape}, expected {(P, X, U, X)}")
        return out
    if not 0.0 <= s.beta < 1.0:
        out.append(f"beta={s.beta} must lie in [0, 1)")
    for x, us in enumerate(s.admissible[:X]):
        if not us:
            out.append(f"state {x} ({s.states[x]}) has no admissible control")
        for u in us:
            if not 0 <= u < U:
                out.append(f"state {x} lists unknown control {u}")
    for p in range(P):
        for x, us in enumerate(s.admissible[:X]):
            for u in us:
                if not 0 <= u < U:
                    continue
                where = f"(param={s.params[p]}, state={s.states[x]}, control={s.controls[u]})"
                row = s.transitions[p, x, u]
                if np.any(row < 0) or abs(row.sum() - 1.0) > PROB_TOL:
                    out.append(f"transition row {where} sums to {row.sum():.12g} or has negative entries")
                model = s.rewards.get((p, x, u))
                if model is None:
                    out.append(f"missing reward model {where}")
                else:
                    out.extend(f"reward model {where}: {m}" for m in _reward_model_problems(model))
    prior = s.prior
    if prior.shape != (P,):
        out.append(f"prior has shape {prior.shape}, expected ({P},)")
    else:
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > PROB_TOL:
            out.append("prior is not a probability vector")
        if not s.degenerate_prior and np.any(prior <= 0):
            out.append("prior has zero entries but scenario is not flagged degenerate")
    if not 0 <= s.true_param < P:
        out.append(f"true_param {s.true_param} out of range")
    if not 0 <= s.initial_state < X:
        out.append(f"initial_state {s.initial_state} out of range")
    return out


def _reward_model_problems(m: RewardModel) -> list[str]:
    if isinstance(m, Categorical):
        probs = np.asarray(m.probs)
        bad = []
        if len(m.support) != len(m.probs) or not m.support:
            bad.append("support and probs lengths differ or are empty")
        elif np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            bad.append(f"probs sum to {probs.sum():.12g} or have negative entries")
        if not np.all(np.isfinite(m.support)):
            bad.append("support values must be finite")
        return bad
    if isinstance(m, TruncatedGaussian):
        bad = []
        if not m.variance > 0:
            bad.append("variance must be positive")
        if not (np.isfinite(m.lo) and np.isfinite(m.hi) and m.lo < m.hi):
            bad.append("truncation interval must be finite with lo < hi")
        return bad
    return [f"unknown reward model type {type(m).__name__}"]


def expected_reward(s: Scenario, p: int, x: int, u: int) -> float:
    s.check_admissible(x, u)
    return s.rewards[(p, x, u)].expected_value()


def reward_bound(s: Scenario) -> float:
    """The constant M bounding |expected reward| over all admissible triples."""
    tab = s.reward_table
    finite = tab[np.isfinite(tab)]
    return float(np.abs(finite).max()) if finite.size else 0.0


def sample_reward(s: Scenario, p: int, x: int, u: int, rng: np.random.Generator) -> float:
    s.check_admissible(x, u)
    return float(s.rewards[(p, x, u)].ppf(rng.random()))


def sample_transition(s: Scenario, p: int, x: int, u: int, rng: np.random.Generator) -> int:
    s.check_admissible(x, u)
    return int(categorical_ppf(s.transitions[p, x, u], rng.random()))


def categorical_ppf(probs, u):
    """Index drawn by inverse CDF; zero-probability entries are never returned."""
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[..., -1:]
    if cdf.ndim == 1:
        return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.shape[-1] - 1)
    idx = (cdf <= np.asarray(u)[..., None]).sum(axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1)


def log_reward_density(s: Scenario, p: int, x: int, u: int, r: float) -> float:
    s.check_admissible(x, u)
    return s.rewards[(p, x, u)].logpdf(r)


def log_transition_density(s: Scenario, p: int, x: int, u: int, y: int) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(s.transitions[p, x, u, y]))
