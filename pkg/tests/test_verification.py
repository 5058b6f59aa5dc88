import pytest

from app.errors import ConfigError, UnknownScenarioError
from app.services.verification import SCENARIOS, run_scenario, run_scenarios, scenario_names

FAST_SCENARIOS = ["fenchel", "fundamental", "spray", "hyperbolic", "se-thresholds", "lipschitz", "strong-convexity"]
SLOW_SCENARIOS = ["hexagon-switching", "hamiltonian", "affine-symmetry", "fiber-scaling",
                  "oracle-hexagon", "oracle-hyperbolic"]


def test_every_scenario_is_covered():
    assert sorted(FAST_SCENARIOS + SLOW_SCENARIOS) == sorted(scenario_names())
    assert all(description for description, _ in SCENARIOS.values())


@pytest.mark.parametrize("name", FAST_SCENARIOS)
def test_fast_scenarios_pass(name):
    report = run_scenario(name)
    failing = [c.name for c in report.criteria if not c.passed]
    assert report.passed, failing
    assert report.scenario == name
    assert report.criteria


@pytest.mark.slow
@pytest.mark.parametrize("name", SLOW_SCENARIOS)
def test_slow_scenarios_pass(name):
    report = run_scenario(name)
    assert report.passed, [c.model_dump() for c in report.criteria if not c.passed]


def test_seed_is_reproducible():
    first, second = run_scenarios(["fenchel", "fenchel"], seed=7)
    assert [c.measured for c in first.criteria] == [c.measured for c in second.criteria]


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError, match="available"):
        run_scenario("fermat")
    assert issubclass(UnknownScenarioError, ConfigError)
