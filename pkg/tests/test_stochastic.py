import numpy as np
import pytest

from h2sched.model import DemandSpec, MarketSeries, ModelError, build, solve
from h2sched.solver import enumerate_solve, solve_bnb
from h2sched.stochastic import (
    ScenarioSet,
    StochasticSolution,
    build_two_stage,
    default_imbalance_prices,
    solve_two_stage,
    synthetic_scenarios,
)

from instances import MAX_H, PLANT, curve_data

LAM = np.array([35.0, -4.0])
BASE = np.array([1.2, 0.9])


def _instance(kind, n, seed=0):
    scen = ScenarioSet.with_default_prices(synthetic_scenarios(BASE, n, seed, sigma=0.4), LAM)
    series = scen.day_ahead_series(LAM)
    demand = DemandSpec.default(2, 1.2 * MAX_H)
    return build_two_stage(PLANT, series, demand, scen, kind, curve_data(kind)), scen


@pytest.mark.parametrize("kind,n", [("l", 2), ("soc", 2), ("mil", 1), ("misoc", 1)])
@pytest.mark.parametrize("seed", range(2))
def test_matches_enumeration(kind, n, seed):
    ir, _ = _instance(kind, n, seed)
    ref = enumerate_solve(ir, max_binaries=24)
    res = solve_bnb(ir)
    assert abs(res.objective - ref.objective) <= 1e-6 * (1 + abs(ref.objective))


def test_single_forecast_scenario_matches_deterministic():
    lam = np.array([40.0, 10.0, -5.0])
    wind = np.array([1.5, 0.5, 2.0])
    scen = ScenarioSet.with_default_prices(wind[:, None], lam)
    demand = DemandSpec.default(3, 30.0)
    two = solve_two_stage(build_two_stage(PLANT, scen.day_ahead_series(lam), demand, scen, "l", curve_data("l")))
    det = solve(build(PLANT, MarketSeries(lam, wind), demand, "l", curve_data("l")))
    assert two.expected_objective == pytest.approx(det.objective, abs=1e-6)


def test_solution_views():
    ir, scen = _instance("l", 2)
    sol = solve_two_stage(ir)
    assert isinstance(sol, StochasticSolution)
    assert sol.p_rt.shape == (2, scen.n)
    assert sol.first_stage.p.shape == (2,)
    assert sol.status == "optimal"
    # real-time balance holds per scenario
    lhs = sol.d_up - sol.d_down + sol.p_rt - sol.first_stage.p[:, None]
    rhs = scen.wind_rt - scen.mean_wind()[:, None]
    assert np.allclose(lhs, rhs, atol=1e-6)


def test_day_ahead_wind_must_be_mean():
    scen = ScenarioSet.with_default_prices(synthetic_scenarios(BASE, 3, 1), LAM)
    wrong = MarketSeries(LAM, BASE)
    with pytest.raises(ModelError, match="mean"):
        build_two_stage(PLANT, wrong, DemandSpec.default(2, 10.0), scen, "l", curve_data("l"))


def test_imbalance_price_order():
    wind = np.ones((2, 1))
    scen = ScenarioSet([1.0], wind, LAM + 1.0, LAM + 2.0)
    with pytest.raises(ModelError, match="imbalance"):
        build_two_stage(PLANT, MarketSeries(LAM, wind[:, 0]), DemandSpec.default(2, 10.0), scen, "l", curve_data("l"))


def test_default_prices_bracket_day_ahead():
    lam = np.array([50.0, 0.0, -20.0])
    up, down = default_imbalance_prices(lam)
    assert np.all(up < lam) and np.all(lam < down)
    assert up[0] == pytest.approx(45.0) and down[0] == pytest.approx(55.0)


@pytest.mark.parametrize(
    "pi,wind",
    [([0.5, 0.6], np.ones((2, 2))), ([-0.5, 1.5], np.ones((2, 2))), ([1.0], np.ones((2, 2))), ([1.0], -np.ones((2, 1)))],
)
def test_scenario_validation(pi, wind):
    with pytest.raises(ModelError):
        ScenarioSet(pi, wind, LAM - 1, LAM + 1)


def test_synthetic_scenarios_seeded():
    a = synthetic_scenarios(np.linspace(0, 2, 24), 5, seed=3)
    b = synthetic_scenarios(np.linspace(0, 2, 24), 5, seed=3)
    assert a.shape == (24, 5)
    assert np.array_equal(a, b)
    assert np.all(a >= 0) and np.all(a <= 4.0)
    assert not np.array_equal(a, synthetic_scenarios(np.linspace(0, 2, 24), 5, seed=4))


def test_horizon_mismatch():
    scen = ScenarioSet.with_default_prices(np.ones((3, 1)), np.ones(3))
    with pytest.raises(ModelError, match="horizon"):
        build_two_stage(PLANT, MarketSeries(LAM, [1.0, 1.0]), DemandSpec.default(2, 10.0), scen, "l", curve_data("l"))
