"""Thompson sampling on parametrized finite MDPs: simulation, regret decomposition, diagnostics."""

__version__ = "0.1.0"

from .model import (
    Categorical,
    Scenario,
    TruncatedGaussian,
    expected_reward,
    log_reward_density,
    log_transition_density,
    reward_bound,
    sample_reward,
    sample_transition,
    validate_scenario,
)
from .planner import bellman_backup, solve, temporal_difference_error, value_iteration
from .scenarios import ScenarioError, example1, example2, example3, load_scenario
from .thompson import (
    ORACLE,
    THOMPSON,
    FixedControl,
    Oracle,
    Thompson,
    posterior_step,
    run_batch,
    simulate,
    ts_choose,
)
