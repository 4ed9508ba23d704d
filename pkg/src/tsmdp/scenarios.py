"""Built-in scenarios and the JSON scenario file format."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import Categorical, Scenario, TruncatedGaussian, validate_scenario

GAUSS_WIDTH = 6.0


class ScenarioError(ValueError):
    """Raised when a scenario source cannot be parsed or fails validation."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []


def _point_mass(support, value):
    return Categorical(support, [1.0 if v == value else 0.0 for v in support])


def _absorbing_transitions(n_params, n_states, n_controls, moves):
    """moves maps (state, control) -> next state, identical across parameters."""
    q = np.zeros((n_params, n_states, n_controls, n_states))
    for (x, u), y in moves.items():
        q[:, x, u, y] = 1.0
    return q


def example1(beta: float = 0.9, prior_a: float = 0.5) -> Scenario:
    """Three states; the first control decides which absorbing state you land in.

    True parameter is B. Rewards are deterministic: 1 in the absorbing state
    matching the true parameter, 0 elsewhere, 0 at the start state.
    """
    sup = (0.0, 1.0)
    A, B = 0, 1
    x0, xA, xB = 0, 1, 2
    rewards = {}
    for p in (A, B):
        rewards[(p, x0, A)] = _point_mass(sup, 0.0)
        rewards[(p, x0, B)] = _point_mass(sup, 0.0)
        rewards[(p, xA, A)] = _point_mass(sup, 1.0 if p == A else 0.0)
        rewards[(p, xB, B)] = _point_mass(sup, 1.0 if p == B else 0.0)
    q = _absorbing_transitions(2, 3, 2, {(x0, A): xA, (x0, B): xB, (xA, A): xA, (xB, B): xB})
    return Scenario(
        states=("x0", "xA", "xB"),
        controls=("A", "B"),
        params=("A", "B"),
        admissible=((A, B), (A,), (B,)),
        rewards=rewards,
        transitions=q,
        beta=beta,
        prior=np.array([prior_a, 1.0 - prior_a]),
        true_param=B,
        name="example1",
        description="Absorbing three-state process; regret grows without bound.",
    )


def example2(beta: float = 0.9, prior_a: float = 0.999) -> Scenario:
    """Absorption into an unfavorable state; true parameter B.

    The prior on A is "approximately 1"; 0.999 is used.
    """
    sup = (0.0, 0.1, 0.5, 1.0)
    A, B = 0, 1
    cA, cB, c1, c2 = 0, 1, 2, 3
    x0, xA, xB = 0, 1, 2
    table = {
        (A, xA, c1): 1.0, (B, xA, c1): 0.0,
        (A, xA, c2): 1.0, (B, xA, c2): 0.5,
        (A, xB, c1): 0.0, (B, xB, c1): 1.0,
        (A, xB, c2): 0.1, (B, xB, c2): 1.0,
    }
    rewards = {k: _point_mass(sup, v) for k, v in table.items()}
    for p in (A, B):
        rewards[(p, x0, cA)] = _point_mass(sup, 0.0)
        rewards[(p, x0, cB)] = _point_mass(sup, 0.0)
    moves = {(x0, cA): xA, (x0, cB): xB}
    for x in (xA, xB):
        moves[(x, c1)] = x
        moves[(x, c2)] = x
    q = _absorbing_transitions(2, 3, 4, moves)
    return Scenario(
        states=("x0", "xA", "xB"),
        controls=("A", "B", "1", "2"),
        params=("A", "B"),
        admissible=((cA, cB), (c1, c2), (c1, c2)),
        rewards=rewards,
        transitions=q,
        beta=beta,
        prior=np.array([prior_a, 1.0 - prior_a]),
        true_param=B,
        name="example2",
        description="Two absorbing states with deterministic rewards; prior on A realized as 0.999.",
    )


def gaussian_family(means: dict[int, float], variance: float, width: float = GAUSS_WIDTH):
    """Truncated Gaussians sharing one interval [min mean - w*sd, max mean + w*sd].

    A shared interval keeps every parameter's reward law mutually absolutely
    continuous; the truncated mass is below 1e-8 at the default width.
    """
    sd = math.sqrt(variance)
    lo = min(means.values()) - width * sd
    hi = max(means.values()) + width * sd
    return {p: TruncatedGaussian(mu, variance, lo, hi) for p, mu in means.items()}


def example3(beta: float = 0.9, prior_a: float = 0.5, variance: float = 0.1) -> Scenario:
    """Single state, two controls, Gaussian rewards; true parameter B.

    Means: A -> (0.5, 0.4), B -> (0.3, 0.8) for controls ("1", "2").
    """
    A, B = 0, 1
    c1, c2 = 0, 1
    rewards = {}
    for u, means in ((c1, {A: 0.5, B: 0.3}), (c2, {A: 0.4, B: 0.8})):
        for p, model in gaussian_family(means, variance).items():
            rewards[(p, 0, u)] = model
    return Scenario(
        states=("x0",),
        controls=("1", "2"),
        params=("A", "B"),
        admissible=((c1, c2),),
        rewards=rewards,
        transitions=np.ones((2, 1, 2, 1)),
        beta=beta,
        prior=np.array([prior_a, 1.0 - prior_a]),
        true_param=B,
        name="example3",
        description="Single-state Gaussian-reward scenario (variance 0.1, truncated at 6 sd).",
    )


BUILTINS = {"example1": example1, "example2": example2, "example3": example3}


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "description": s.description,
        "states": list(s.states),
        "controls": list(s.controls),
        "params": list(s.params),
        "admissible": [list(a) for a in s.admissible],
        "beta": s.beta,
        "prior": s.prior.tolist(),
        "true_param": s.true_param,
        "initial_state": s.initial_state,
        "degenerate_prior": s.degenerate_prior,
        "rewards": [
            {"param": p, "state": x, "control": u, "model": m.to_dict()}
            for (p, x, u), m in sorted(s.rewards.items())
        ],
        "transitions": s.transitions.tolist(),
    }


def _field(d, key, ctx=""):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise ScenarioError(f"missing field '{ctx}{key}'") from None


def _reward_from_dict(d: dict, ctx: str):
    kind = _field(d, "type", ctx)
    try:
        if kind == "Categorical":
            return Categorical(_field(d, "support", ctx), _field(d, "probs", ctx))
        if kind == "TruncatedGaussian":
            return TruncatedGaussian(
                float(_field(d, "mean", ctx)),
                float(_field(d, "variance", ctx)),
                float(_field(d, "lo", ctx)),
                float(_field(d, "hi", ctx)),
            )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{ctx}': {exc}") from None
    raise ScenarioError(f"field '{ctx}type': unknown reward model {kind!r}")


def scenario_from_dict(d: dict) -> Scenario:
    """Build a Scenario from its JSON form; raises ScenarioError on malformed or invalid input."""
    states = _field(d, "states")
    controls = _field(d, "controls")
    params = _field(d, "params")
    rewards = {}
    for i, entry in enumerate(_field(d, "rewards")):
        ctx = f"rewards[{i}]."
        key = (int(_field(entry, "param", ctx)), int(_field(entry, "state", ctx)), int(_field(entry, "control", ctx)))
        rewards[key] = _reward_from_dict(_field(entry, "model", ctx), ctx + "model.")
    try:
        transitions = np.asarray(_field(d, "transitions"), dtype=float)
    except ValueError as exc:
        raise ScenarioError(f"field 'transitions': {exc}") from None
    try:
        beta = float(_field(d, "beta"))
        prior = np.asarray(_field(d, "prior"), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field 'beta'/'prior': {exc}") from None
    s = Scenario(
        states=states,
        controls=controls,
        params=params,
        admissible=_field(d, "admissible"),
        rewards=rewards,
        transitions=transitions,
        beta=beta,
        prior=prior,
        true_param=int(_field(d, "true_param")),
        initial_state=int(d.get("initial_state", 0)),
        degenerate_prior=bool(d.get("degenerate_prior", False)),
        name=d.get("name", "custom"),
        description=d.get("description", ""),
    )
    problems = validate_scenario(s)
    if problems:
        raise ScenarioError("scenario failed validation: " + "; ".join(problems), problems)
    return s


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2))


def load_scenario(source) -> Scenario:
    """Load a built-in by name (example1/2/3) or a JSON scenario file."""
    if isinstance(source, Scenario):
        return source
    if str(source) in BUILTINS:
        return BUILTINS[str(source)]()
    path = Path(source)
    if not path.exists():
        raise ScenarioError(f"unknown scenario {source!r}: not a built-in name or an existing file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)
