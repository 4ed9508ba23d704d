"""Discounted value iteration for each candidate parameter, and the TD error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Scenario

DEFAULT_TOL = 1e-9


def _q_values(s: Scenario, p: int, V: np.ndarray) -> np.ndarray:
    """One-step lookahead values, shape (n_states, n_controls); -inf where inadmissible."""
    r = s.reward_table[p]
    q = np.where(s.admissible_mask, r, 0.0) + s.beta * (s.transitions[p] @ V)
    return np.where(s.admissible_mask, q, -np.inf)


def bellman_backup(s: Scenario, p: int, V) -> np.ndarray:
    """(TV)(x) = max over admissible u of r(x,u) + beta * sum_y q(y|x,u) V(y)."""
    return _q_values(s, p, np.asarray(V, dtype=float)).max(axis=1)


def greedy_policy(s: Scenario, p: int, V) -> np.ndarray:
    # argmax returns the first maximizer, i.e. lowest control index on ties
    return _q_values(s, p, np.asarray(V, dtype=float)).argmax(axis=1)


def value_iteration(s: Scenario, p: int, tol: float = DEFAULT_TOL, max_iter: int = 1_000_000):
    """Solve the known-parameter problem for parameter ``p``.

    Iterates until ||V_{k+1} - V_k|| < tol (1 - beta) / (2 beta), which keeps
    the Bellman residual of the returned V below ``tol``. Returns
    ``(values, policy)`` as arrays over states.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    beta = s.beta
    V = np.zeros(s.n_states)
    stop = np.inf if beta == 0 else tol * (1 - beta) / (2 * beta)
    for _ in range(max_iter):
        V_new = bellman_backup(s, p, V)
        done = np.max(np.abs(V_new - V)) < stop
        V = V_new
        if done:
            break
    return V, greedy_policy(s, p, V)


@dataclass(frozen=True)
class Plan:
    """Optimal values and greedy policies for every parameter of a scenario."""

    values: np.ndarray    # (n_params, n_states)
    policies: np.ndarray  # (n_params, n_states), control indices
    tol: float

    def value(self, p: int) -> np.ndarray:
        return self.values[p]

    def policy(self, p: int) -> np.ndarray:
        return self.policies[p]


def solve(s: Scenario, tol: float = DEFAULT_TOL) -> Plan:
    """Value tables and policy tables for all parameters (cached per scenario)."""
    key = ("plan", tol)
    if key not in s._cache:
        sols = [value_iteration(s, p, tol) for p in range(s.n_params)]
        values = np.array([v for v, _ in sols])
        policies = np.array([mu for _, mu in sols], dtype=int)
        values.setflags(write=False)
        policies.setflags(write=False)
        s._cache[key] = Plan(values, policies, tol)
    return s._cache[key]


def temporal_difference_error(s: Scenario, p: int, V, x: int, u: int) -> float:
    """phi(x, u) = r(x,u) + beta * E[V(next)] - V(x), for an optimal V."""
    s.check_admissible(x, u)
    V = np.asarray(V, dtype=float)
    return float(s.reward_table[p, x, u] + s.beta * s.transitions[p, x, u] @ V - V[x])


def td_error_table(s: Scenario, p: int, V) -> np.ndarray:
    """phi for every (state, control); NaN where inadmissible."""
    V = np.asarray(V, dtype=float)
    phi = s.reward_table[p] + s.beta * (s.transitions[p] @ V) - V[:, None]
    return np.where(s.admissible_mask, phi, np.nan)
