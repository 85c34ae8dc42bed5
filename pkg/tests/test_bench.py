import numpy as np
import pytest

from cpslab import SCENARIOS, run_bench, run_scenario
from cpslab.bench import _generate
from cpslab.rng import make_rng


def test_scenarios_registered():
    assert SCENARIOS == (
        "wrong-count",
        "shifted-eps",
        "wrong-covariates",
        "est-sigma",
        "misspec-var",
    )


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError):
        run_scenario("nope", 100, 0, 1)


def test_replicates_deterministic():
    a = run_scenario("wrong-count", 100, 3, seed=42)
    b = run_scenario("wrong-count", 100, 3, seed=42)
    c = run_scenario("wrong-count", 100, 4, seed=42)
    assert a == b
    assert a != c


def test_alternatives_lose_evidence():
    # every scenario produces negative log Bayes factors at moderate n
    for scenario in SCENARIOS:
        vals = [run_scenario(scenario, 200, rep, seed=7) for rep in range(5)]
        assert all(v < 0 for v in vals), scenario


def test_short_grid_trend():
    rows, summary = run_bench(["wrong-count"], [100, 200], replicates=5, seed=3)
    assert len(rows) == 10
    assert summary["wrong-count"][200] < summary["wrong-count"][100]


def test_generator_has_one_jump():
    rng = make_rng(0, 0, 0, 0)
    ds = _generate(100, rng, (1.0, 1.0))
    assert ds.n == 100 and ds.X.shape == (100, 8)
    # the two halves differ in intercept by construction
    assert abs(np.mean(ds.y[:50]) - np.mean(ds.y[50:])) > 1.0
