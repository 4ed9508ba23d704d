import numpy as np
import pytest
from hypothesis import strategies as st

from tsmdp.model import Categorical, Scenario
from tsmdp.scenarios import example1, example2, example3


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex2():
    return example2()


@pytest.fixture(scope="session")
def ex3():
    return example3()


@pytest.fixture(params=["example1", "example2", "example3"], scope="session")
def builtin(request):
    return {"example1": example1, "example2": example2, "example3": example3}[request.param]()


def random_scenario(rng: np.random.Generator, n_states=3, n_controls=3, n_params=2, beta=0.9, support=(0.0, 0.5, 1.0)):
    """Random categorical scenario with full-support rewards and transitions."""
    admissible = []
    for _ in range(n_states):
        k = rng.integers(1, n_controls + 1)
        admissible.append(tuple(sorted(rng.choice(n_controls, size=k, replace=False).tolist())))
    rewards = {}
    for p in range(n_params):
        for x, us in enumerate(admissible):
            for u in us:
                rewards[(p, x, u)] = Categorical(support, rng.dirichlet(np.ones(len(support))))
    q = rng.dirichlet(np.ones(n_states), size=(n_params, n_states, n_controls))
    prior = rng.dirichlet(np.ones(n_params))
    return Scenario(
        states=[f"s{i}" for i in range(n_states)],
        controls=[f"c{i}" for i in range(n_controls)],
        params=[f"p{i}" for i in range(n_params)],
        admissible=admissible,
        rewards=rewards,
        transitions=q,
        beta=beta,
        prior=prior,
        true_param=int(rng.integers(n_params)),
    )


scenario_seeds = st.integers(min_value=0, max_value=2**31 - 1)


CRITERIA: list[str] = []


@pytest.fixture
def record_criterion():
    """Print and collect one 'CRITERION k: PASS/FAIL detail' line."""

    def record(k, ok, detail):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
