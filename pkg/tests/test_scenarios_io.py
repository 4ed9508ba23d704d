import json

import numpy as np
import pytest

from tsmdp.model import Categorical, TruncatedGaussian
from tsmdp.scenarios import (
    BUILTINS,
    ScenarioError,
    example1,
    example3,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def same_scenario(a, b):
    assert a.states == b.states and a.controls == b.controls and a.params == b.params
    assert a.admissible == b.admissible and a.true_param == b.true_param and a.beta == b.beta
    np.testing.assert_array_equal(a.prior, b.prior)
    np.testing.assert_array_equal(a.transitions, b.transitions)
    assert a.rewards.keys() == b.rewards.keys()
    for k in a.rewards:
        assert a.rewards[k].to_dict() == b.rewards[k].to_dict()


class TestBuiltins:
    def test_shapes(self):
        s1, s3 = example1(), example3()
        assert s1.transitions.shape == (2, 3, 2, 3)
        assert s3.transitions.shape == (2, 1, 2, 1)
        assert s1.params[s1.true_param] == "B" and s3.params[s3.true_param] == "B"

    def test_example3_models(self, ex3):
        m = ex3.rewards[(1, 0, 1)]
        assert isinstance(m, TruncatedGaussian) and m.mu == 0.8 and m.variance == 0.1
        # both parameters share one truncation interval per control
        for u in (0, 1):
            a, b = ex3.rewards[(0, 0, u)], ex3.rewards[(1, 0, u)]
            assert (a.lo, a.hi) == (b.lo, b.hi)

    def test_example2_prior(self, ex2):
        assert ex2.prior[0] == pytest.approx(0.999)

    def test_example1_rewards_categorical(self, ex1):
        assert all(isinstance(m, Categorical) for m in ex1.rewards.values())

    def test_load_by_name(self):
        for name in BUILTINS:
            assert load_scenario(name).name == name


class TestRoundTrip:
    def test_builtin(self, builtin, tmp_path):
        path = tmp_path / "s.json"
        save_scenario(builtin, path)
        same_scenario(builtin, load_scenario(path))

    def test_dict(self, builtin):
        same_scenario(builtin, scenario_from_dict(json.loads(json.dumps(scenario_to_dict(builtin)))))


class TestMalformed:
    def test_missing_field_named(self, ex3):
        d = scenario_to_dict(ex3)
        del d["beta"]
        with pytest.raises(ScenarioError, match="beta"):
            scenario_from_dict(d)

    def test_nested_field_named(self, ex3):
        d = scenario_to_dict(ex3)
        del d["rewards"][2]["model"]["variance"]
        with pytest.raises(ScenarioError, match=r"rewards\[2\]\.model\.variance"):
            scenario_from_dict(d)

    def test_unknown_model(self, ex3):
        d = scenario_to_dict(ex3)
        d["rewards"][0]["model"]["type"] = "Beta"
        with pytest.raises(ScenarioError, match="unknown reward model"):
            scenario_from_dict(d)

    def test_bad_row_reported(self, ex3):
        d = scenario_to_dict(ex3)
        d["transitions"][1][0][1][0] = 0.5
        with pytest.raises(ScenarioError) as info:
            scenario_from_dict(d)
        assert any("param=B" in v for v in info.value.violations)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError, match="line 1"):
            load_scenario(path)

    def test_unknown_name(self):
        with pytest.raises(ScenarioError):
            load_scenario("example9")
