import numpy as np
import pytest
from hypothesis import given, strategies as st

from h2sched.curve import QuadraticCurve, QuadraticPiece, Segment, SegmentSet
from h2sched.ir import ProblemIR
from h2sched.model import (
    DemandSpec,
    MarketSeries,
    ModelError,
    PlantConfig,
    attach_hyp_l,
    attach_hyp_soc,
    build,
    build_base,
    full_load_demand,
    soc_reformulate,
    solve,
    solve_daily,
)
from h2sched.solver import check_feasibility, enumerate_solve

from oracles import two_hour_negative_price

KINDS = ["mil", "l", "soc", "misoc"]


def _fix_off(ir: ProblemIR) -> ProblemIR:
    ir = ir.copy()
    for j in ir.handles["z_off"].ravel():
        ir.set_bounds(int(j), lb=1.0)
    return ir


@pytest.mark.parametrize("kind", KINDS)
def test_no_wind_objective_zero(kind, plant, curve_data):
    ir = build(plant, MarketSeries([40.0], [0.0]), DemandSpec.default(1, 10.0), kind, curve_data[kind])
    sol = solve(ir)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert sol.state[0] == "off"
    assert np.allclose([sol.p[0], sol.f[0], sol.h[0]], 0.0, atol=1e-9)


@pytest.mark.parametrize("kind", ["mil", "l"])
def test_two_hour_negative_price_oracle(kind, plant, curve_data, frozen):
    ref = frozen["two_hour_negative"]
    ir = build(plant, MarketSeries([-10.0, -10.0], [2.0, 2.0]), DemandSpec.default(2, 1e6), kind, curve_data[kind])
    sol = solve(ir)
    assert sol.objective == pytest.approx(ref["objective"], abs=1e-6)
    assert [s for s, _ in ref["plan"]] == list(sol.state)
    assert np.allclose(sol.p, [pw for _, pw in ref["plan"]], atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_two_hour_negative_price_all_models_on(kind, plant, curve_data):
    ir = build(plant, MarketSeries([-10.0, -10.0], [2.0, 2.0]), DemandSpec.default(2, 1e6), kind, curve_data[kind])
    sol = solve(ir)
    assert list(sol.state) == ["on", "on"]
    assert np.allclose(sol.p, plant.p_max, atol=1e-6)
    assert abs(sol.objective - enumerate_solve(ir).objective) <= 1e-6 * (1 + abs(sol.objective))


@pytest.mark.parametrize("kind", KINDS)
def test_all_off_states(kind, plant, curve_data):
    wind = np.array([1.2, 0.4, 2.0])
    ir = _fix_off(build(plant, MarketSeries([-5.0, 30.0, 60.0], wind), DemandSpec.default(3, 40.0), kind, curve_data[kind]))
    sol = solve(ir)
    assert np.allclose(sol.h, 0.0, atol=1e-9)
    assert np.allclose(sol.p, 0.0, atol=1e-9)
    assert np.allclose(sol.f, wind, atol=1e-9)
    if "z_seg" in sol.values:
        assert np.allclose(sol.z_seg, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_l_dominates_mil(seed, plant, segs10, curve):
    rng = np.random.default_rng(seed)
    T = 4
    series = MarketSeries(rng.uniform(-20, 80, T), rng.uniform(0, 2, T))
    demand = DemandSpec.default(T, rng.uniform(5, 60))
    mil = solve(build(plant, series, demand, "mil", segs10)).objective
    rel = solve(build(plant, series, demand, "l", segs10)).objective
    assert rel >= mil - 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_soc_dominates_equality_model(seed, plant, quad):
    rng = np.random.default_rng(100 + seed)
    lam, wind = rng.uniform(-20, 60, 2), rng.uniform(0.2, 2, 2)
    soc = solve(build(plant, MarketSeries(lam, wind), DemandSpec.default(2, 1e6), "soc", quad)).objective

    def h_of(p):
        v = float(quad(p))
        return v if v >= 0 else -1e9

    best, _ = two_hour_negative_price(lam, wind, plant.chi, plant.k_su, plant.p_max, plant.p_min, plant.p_sb, h_of)
    assert soc >= best - 1e-9


def test_misoc_single_piece_equals_soc(plant, quad):
    series = MarketSeries([20.0, -3.0], [1.5, 0.8])
    demand = DemandSpec.default(2, 25.0)
    soc = solve(build(plant, series, demand, "soc", quad)).objective
    one = solve(build(plant, series, demand, "misoc", [QuadraticPiece(quad, plant.p_min, plant.p_max)])).objective
    assert one == pytest.approx(soc, abs=1e-6)


def test_soc_binds_with_slack_demand(plant, quad):
    ir = build(plant, MarketSeries([30.0, 30.0], [2.0, 2.0]), DemandSpec.default(2, 1e6), "soc", quad)
    for j in ir.handles["z_on"]:
        ir.set_bounds(int(j), lb=1.0)
    sol = solve(ir)
    assert np.max(np.abs(quad(sol.p_tilde) - sol.h)) < 1e-6


def test_soc_reformulate_solve_matches(plant, quad):
    ir = build(plant, MarketSeries([20.0, -3.0], [1.5, 0.8]), DemandSpec.default(2, 25.0), "soc", quad)
    cone = soc_reformulate(ir)
    assert not cone.quadratic and len(cone.cones) == 2
    assert solve(cone).objective == pytest.approx(solve(ir).objective, abs=1e-7)


def test_soc_reformulate_unit_cone():
    ir = ProblemIR()
    q = ir.add_var("q", -5, 5)
    h = ir.add_var("h", -5, 5)
    ir.add_quadratic("hyp", {q: -1.0}, {h: -1.0}, 0.0)
    cone = soc_reformulate(ir)
    k = cone.cones[0]
    assert k.scale == 1.0
    x = np.zeros(cone.n_vars)
    x[q], x[k.r], x[h] = 1.0, 1.0, -1.0
    assert check_feasibility(cone, x, tol=0.0) == []


def test_soc_reformulate_point_sampling(plant, quad):
    ir = attach_hyp_soc(build_base(plant, MarketSeries([1.0], [2.0]), DemandSpec.default(1, 1e6)), quad)
    cone = soc_reformulate(ir)
    H, Hc = ir.handles, cone.handles
    qcon, lin = ir.quadratic[0], next(c for c in cone.linear if c.name.endswith(".lin"))
    r = int(Hc["r"][0])
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(1000):
        x = np.zeros(ir.n_vars)
        x[H["p_tilde"][0]] = rng.uniform(0, 1.2)
        x[H["h"][0]] = rng.uniform(-2, 20)
        x[H["z_on"][0]] = rng.integers(0, 2)
        xc = np.zeros(cone.n_vars)
        xc[: ir.n_vars] = x
        # r is pinned by the equality row
        xc[r] = -(lin.activity(xc) - lin.rhs)
        assert lin.violation(xc) < 1e-12
        agree += (qcon.violation(x) == 0.0) == (cone.cones[0].violation(xc) == 0.0)
    assert agree == 1000


def test_curve_validation(plant, curve, quad, segs2):
    base = build_base(plant, MarketSeries([1.0], [1.0]), DemandSpec.default(1, 5.0))
    with pytest.raises(ModelError):
        attach_hyp_soc(base, QuadraticCurve(0.5, 1.0, 0.0))
    with pytest.raises(ModelError, match="cover"):
        attach_hyp_l(base, SegmentSet([Segment(15.0, 2.0, 0.2, 1.0)]))
    with pytest.raises(ModelError, match="overlap"):
        build(plant, MarketSeries([1.0], [1.0]), DemandSpec.default(1, 5.0), "misoc",
              [QuadraticPiece(quad, 0.15, 0.6), QuadraticPiece(quad, 0.5, 1.0)])
    with pytest.raises(ModelError, match="already"):
        attach_hyp_l(attach_hyp_l(base, segs2), segs2)
    with pytest.raises(ModelError):
        build(plant, MarketSeries([1.0], [1.0]), DemandSpec.default(1, 5.0), "cubic", None)


def test_inputs_validated():
    with pytest.raises(ModelError):
        MarketSeries([1.0, 2.0], [1.0])
    with pytest.raises(ModelError):
        PlantConfig(p_min=0.005)
    with pytest.raises(ModelError):
        DemandSpec([[0, 1]], [1.0, 2.0])
    with pytest.raises(ModelError):
        build_base(PlantConfig(), MarketSeries([1.0, 2.0], [1.0, 1.0]), DemandSpec([[0]], [1.0]))


def test_inputs_not_mutated(plant, segs2):
    base = build_base(plant, MarketSeries([1.0, 2.0], [1.0, 1.0]), DemandSpec.default(2, 5.0))
    text = base.dumps()
    attach_hyp_l(base, segs2)
    assert base.dumps() == text


@given(st.integers(1, 60))
def test_default_periods_cover(T):
    d = DemandSpec.default(T, 3.0)
    d.check_horizon(T)
    assert len(d.periods) == (T // 24 if T % 24 == 0 else 1)


def test_full_load_demand(curve):
    assert full_load_demand(curve, 0.5, 24) == pytest.approx(12 * 17.5)


def test_initial_off_charges_startup(plant, segs2):
    series = MarketSeries([-10.0], [2.0])
    warm = solve(build(plant, series, DemandSpec.default(1, 1e6), "l", segs2))
    cold = solve(build(plant, series, DemandSpec.default(1, 1e6), "l", segs2, initial_off=True))
    stay_off = -10.0 * 2.0
    assert cold.objective == pytest.approx(max(warm.objective - plant.k_su, stay_off), abs=1e-6)
    assert cold.state[0] == "off"


def test_solve_daily_splits_days(plant, segs2):
    rng = np.random.default_rng(3)
    series = MarketSeries(rng.uniform(0, 60, 48), rng.uniform(0, 2, 48))
    demand = DemandSpec.default(48, 100.0)
    days = solve_daily(plant, series, demand, "l", segs2)
    assert len(days) == 2
    first = solve(build(plant, series.window(0, 24), DemandSpec.default(24, 100.0), "l", segs2))
    assert days[0].objective == pytest.approx(first.objective, abs=1e-9)
    with pytest.raises(ModelError, match="contiguous"):
        solve_daily(plant, MarketSeries(np.ones(3), np.ones(3)), DemandSpec([[0, 2], [1]], [1.0, 1.0]), "l", segs2)
