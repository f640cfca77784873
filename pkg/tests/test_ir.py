import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from h2sched.curve import linearize, partition_breakpoints, quadratic_per_segment
from h2sched.ir import IRError, ProblemIR, dumps, loads
from h2sched.model import DemandSpec, MarketSeries, build
from h2sched.stochastic import ScenarioSet, build_two_stage, synthetic_scenarios

from instances import expected_counts


def _small_ir():
    ir = ProblemIR()
    x = ir.add_vars("x", 2, lb=-1.0, ub=3.5)
    b = ir.add_var("b", binary=True, group="sel")
    ir.add_linear("row", {x[0]: 1.0, x[1]: -0.1, b: 2.0}, "<=", 1.0 / 3.0)
    ir.add_quadratic("q", {x[0]: -0.7}, {x[1]: 1.0}, -2.0, group="curve")
    r = ir.add_var("r", 0.0, math.inf)
    ir.add_cone("k", r, x[1], 0.5)
    ir.add_objective({x[0]: 1.0, b: -0.25})
    ir.objective_constant = 0.125
    ir.meta["note"] = {"a": [1, 2]}
    return ir


def test_roundtrip_exact():
    ir = _small_ir()
    back = loads(dumps(ir))
    assert back == ir
    assert dumps(back) == dumps(ir)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=6))
def test_roundtrip_floats(coefs):
    ir = ProblemIR()
    x = ir.add_vars("x", len(coefs))
    ir.add_linear("c", {int(j): c for j, c in zip(x, coefs)}, ">=", coefs[0])
    ir.add_objective({int(j): c for j, c in zip(x, coefs)})
    assert loads(ir.dumps()) == ir


def test_model_roundtrip(plant, curve_data):
    series = MarketSeries([10.0, -5.0, 30.0], [0.5, 1.5, 0.0])
    for kind, data in curve_data.items():
        ir = build(plant, series, DemandSpec.default(3, 20.0), kind, data)
        assert ProblemIR.loads(ir.dumps()) == ir


def test_undeclared_reference():
    ir = ProblemIR()
    ir.add_var("x")
    with pytest.raises(IRError, match="undeclared"):
        ir.add_linear("bad", {3: 1.0}, "<=", 0)
    with pytest.raises(IRError):
        ir.add_cone("bad", 0, 5, 1.0)


@pytest.mark.parametrize(
    "call",
    [
        lambda ir: ir.add_var("x"),
        lambda ir: ir.add_linear("c", {0: 1}, "<>", 0),
        lambda ir: ir.add_quadratic("q", {0: 1.0}, {}, 0.0),
        lambda ir: ir.add_cone("k", 0, 0, 0.0),
        lambda ir: ir.add_var("y", 2.0, 1.0),
    ],
)
def test_invalid_construction(call):
    ir = ProblemIR()
    ir.add_var("x")
    with pytest.raises(IRError):
        call(ir)


def test_loads_rejects_foreign_text():
    with pytest.raises(IRError):
        loads("hello\n")


def test_copy_is_independent():
    ir = _small_ir()
    cp = ir.copy()
    cp.add_var("extra")
    cp.meta["note"]["a"].append(3)
    assert ir.n_vars == cp.n_vars - 1
    assert ir.meta["note"]["a"] == [1, 2]


def test_compiled_rows():
    ir = _small_ir()
    comp = ir.compiled()
    assert comp.A.shape == (1, ir.n_vars)
    assert comp.row_lo[0] == -math.inf and comp.row_hi[0] == pytest.approx(1 / 3)
    assert len(comp.quad) == 2
    assert comp.binary.sum() == 1


def _data(kind, S, curve, quad):
    if kind in ("mil", "l"):
        return linearize(curve, partition_breakpoints(curve, S))
    if kind == "soc":
        return quad
    return quadratic_per_segment(curve, 2)


CASES = [(k, S) for k in ("mil", "l") for S in (1, 2, 10, 24)] + [("soc", None), ("misoc", 2)]


@pytest.mark.parametrize("T", [2, 24])
@pytest.mark.parametrize("kind,S", CASES)
def test_count_formulas_deterministic(kind, S, T, plant, curve, quad):
    series = MarketSeries(np.full(T, 30.0), np.ones(T))
    ir = build(plant, series, DemandSpec.default(T, 50.0), kind, _data(kind, S, curve, quad))
    assert ir.counts("curve") == expected_counts(kind, S, T)


@pytest.mark.parametrize("n", [1, 5])
@pytest.mark.parametrize("kind,S", CASES)
def test_count_formulas_two_stage(kind, S, n, plant, curve, quad):
    T = 2
    lam = np.array([30.0, 40.0])
    scen = ScenarioSet.with_default_prices(synthetic_scenarios(np.ones(T), n, seed=3), lam)
    ir = build_two_stage(plant, scen.day_ahead_series(lam), DemandSpec.default(T, 50.0), scen, kind,
                         _data(kind, S, curve, quad))
    per_stage = expected_counts(kind, S, T)
    assert ir.counts("curve") == per_stage
    assert ir.counts("curve_rt") == {k: v * n for k, v in per_stage.items()}
