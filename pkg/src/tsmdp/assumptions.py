"""Relative entropies between parameters and the positivity/separation checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .model import Categorical, RewardModel, Scenario, TruncatedGaussian, reward_bound

DEFINITIONAL = "definitional"
DROPPED_FACTOR = "dropped-factor"


def _categorical_kl(p, g) -> float:
    p, g = np.asarray(p, dtype=float), np.asarray(g, dtype=float)
    on = p > 0
    if np.any(g[on] == 0):
        return math.inf
    return float(np.sum(p[on] * np.log(p[on] / g[on])))


def reward_kl(fp: RewardModel, fg: RewardModel) -> float:
    """KL(fp || fg) between two reward laws at the same (state, control)."""
    if isinstance(fp, Categorical) and isinstance(fg, Categorical):
        atoms = sorted(set(fp.support) | set(fg.support))
        pp = np.zeros(len(atoms))
        gg = np.zeros(len(atoms))
        for v, w in zip(fp.support, fp.probs):
            pp[atoms.index(v)] += w
        for v, w in zip(fg.support, fg.probs):
            gg[atoms.index(v)] += w
        return _categorical_kl(pp, gg)
    if isinstance(fp, TruncatedGaussian) and isinstance(fg, TruncatedGaussian):
        if fp.lo < fg.lo or fp.hi > fg.hi:
            return math.inf
        integrand = lambda r: math.exp(fp.logpdf(r)) * (fp.logpdf(r) - fg.logpdf(r))
        val, _ = integrate.quad(integrand, fp.lo, fp.hi, points=[fp.mu, fg.mu], epsabs=1e-12, epsrel=1e-10, limit=200)
        return float(val)
    # a point-mass law and a Lebesgue density are mutually singular
    return math.inf


def transition_kl(qp, qg) -> float:
    return _categorical_kl(qp, qg)


def relative_entropy(s: Scenario, x: int, u: int, p: int, g: int, convention: str = DEFINITIONAL) -> float:
    """K(rho^p | rho^g) at (x, u): reward KL plus transition KL.

    ``convention="dropped-factor"`` reproduces the hand calculation that drops
    the 1/(2 variance) factor of the Gaussian log-density ratio, i.e. it scales
    each Gaussian reward term by 2 * variance. The definitional value is the default.
    """
    s.check_admissible(x, u)
    if p == g:
        raise ValueError("relative entropy needs two distinct parameters")
    fp, fg = s.rewards[(p, x, u)], s.rewards[(g, x, u)]
    k_r = reward_kl(fp, fg)
    if convention == DROPPED_FACTOR and isinstance(fp, TruncatedGaussian):
        k_r *= 2 * fp.variance
    elif convention not in (DEFINITIONAL, DROPPED_FACTOR):
        raise ValueError(f"unknown convention {convention!r}")
    return k_r + transition_kl(s.transitions[p, x, u], s.transitions[g, x, u])


@dataclass
class AssumptionReport:
    density_floor_reward: float
    density_floor_transition: float
    entropy_matrix: dict = field(default_factory=dict)
    entropy_floor: float = math.inf
    violations: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.density_floor_reward > 0 and self.density_floor_transition > 0 and self.entropy_floor > 0

    def to_dict(self, s: Scenario | None = None) -> dict:
        def key(x, u, g):
            if s is None:
                return f"{x},{u},{g}"
            return f"{s.states[x]},{s.controls[u]},{s.params[g]}"

        return {
            "satisfied": self.satisfied,
            "density_floor_reward": self.density_floor_reward,
            "density_floor_transition": self.density_floor_transition,
            "entropy_floor": self.entropy_floor,
            "entropy_matrix": {key(*k): v for k, v in self.entropy_matrix.items()},
            "violations": list(self.violations),
        }


def check_assumption2(s: Scenario) -> AssumptionReport:
    """Density positivity and entropy separation from the true parameter, over all admissible pairs."""
    theta = s.true_param
    violations = []
    f_floor = math.inf
    q_floor = math.inf
    for g in range(s.n_params):
        for x, us in enumerate(s.admissible):
            for u in us:
                where = f"{s.params[g]}: {s.states[x]}, {s.controls[u]}"
                d = s.rewards[(g, x, u)].density_floor()
                f_floor = min(f_floor, d)
                if d <= 0:
                    violations.append(f"reward density f^{where} has zero mass on part of the support")
                row = s.transitions[g, x, u]
                q_floor = min(q_floor, float(row.min()))
                for y in np.flatnonzero(row <= 0):
                    violations.append(f"q^{s.params[g]}({s.states[y]} | {s.states[x]}, {s.controls[u]}) = 0")
    matrix = {}
    for x, us in enumerate(s.admissible):
        for u in us:
            for g in range(s.n_params):
                if g != theta:
                    matrix[(x, u, g)] = relative_entropy(s, x, u, theta, g)
    floor = min(matrix.values()) if matrix else math.inf
    for (x, u, g), k in matrix.items():
        if not k > 0:
            violations.append(
                f"K(rho^{s.params[theta]} | rho^{s.params[g]}) = {k:.3g} at ({s.states[x]}, {s.controls[u]})"
            )
    return AssumptionReport(f_floor, q_floor, matrix, floor, violations)


def lemma4_bound(s: Scenario) -> float:
    """Lower bound -2M(1+beta)/(1-beta) on the expected TD error given a wrong sample."""
    return -2.0 * reward_bound(s) * (1.0 + s.beta) / (1.0 - s.beta)
