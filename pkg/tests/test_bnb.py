import math

import numpy as np
import pytest

from h2sched.ir import ProblemIR
from h2sched.solver import BnBConfig, CapabilityError, EnumerationError, Propagator, enumerate_solve, solve_bnb

from instances import random_instance


def _close(a, b):
    return abs(a - b) <= 1e-6 * (1 + abs(b))


@pytest.mark.parametrize("kind", ["mil", "l", "soc", "misoc"])
@pytest.mark.parametrize("seed", range(3))
def test_matches_enumeration(kind, seed):
    ir, _, _ = random_instance(seed, kind)
    ref = enumerate_solve(ir)
    res = solve_bnb(ir)
    assert res.status == ref.status == "optimal"
    assert _close(res.objective, ref.objective)


@pytest.mark.parametrize("branching", ["most-fractional", "first-fractional", "pseudocost"])
@pytest.mark.parametrize("selection", ["best-bound", "depth-first"])
def test_search_rules_agree(branching, selection):
    ir, _, _ = random_instance(11, "mil")
    ref = enumerate_solve(ir).objective
    res = solve_bnb(ir, BnBConfig(branching=branching, node_selection=selection))
    assert _close(res.objective, ref)


def test_workers_same_objective():
    ir, _, _ = random_instance(5, "misoc")
    one = solve_bnb(ir)
    two = solve_bnb(ir, BnBConfig(workers=2))
    assert _close(two.objective, one.objective)


def test_single_worker_reproducible():
    ir, _, _ = random_instance(6, "mil")
    a, b = solve_bnb(ir), solve_bnb(ir)
    assert a.objective == b.objective and a.nodes == b.nodes
    assert np.array_equal(a.x, b.x)


def test_tree_records():
    ir, _, _ = random_instance(2, "mil")
    res = solve_bnb(ir, BnBConfig(dive=False))
    ids = [row[0] for row in res.tree]
    assert len(ids) == len(set(ids)) == res.nodes
    root = res.tree[0]
    assert root[1] is None and root[2] == 0
    assert root[3] == pytest.approx(res.root_bound)
    depth = {row[0]: row[2] for row in res.tree}
    for nid, parent, d, _ in res.tree[1:]:
        assert depth[parent] == d - 1
    assert solve_bnb(ir, BnBConfig(record_tree=False)).tree == []


def test_root_bound_dominates():
    ir, _, _ = random_instance(4, "l")
    res = solve_bnb(ir)
    assert res.root_bound >= res.objective - 1e-9


def test_node_limit_reports_limit():
    ir, _, _ = random_instance(3, "mil", T=8)
    res = solve_bnb(ir, BnBConfig(node_limit=2, dive=False))
    assert res.status == "limit"
    assert res.bound >= (res.objective if res.x is not None else -math.inf)


def test_infeasible():
    ir = ProblemIR()
    b = ir.add_var("b", binary=True)
    x = ir.add_var("x", 0, 1)
    ir.add_linear("c", {b: 1, x: 1}, ">=", 3)
    ir.add_objective({x: 1})
    assert solve_bnb(ir).status == "infeasible"
    assert enumerate_solve(ir).status == "infeasible"


def test_highs_rejects_conic():
    ir, _, _ = random_instance(0, "soc")
    with pytest.raises(CapabilityError):
        solve_bnb(ir, backend="highs")


def test_enumeration_limit():
    ir, _, _ = random_instance(0, "mil", T=6)
    with pytest.raises(EnumerationError):
        enumerate_solve(ir)


def test_config_validation():
    with pytest.raises(ValueError):
        BnBConfig(branching="random")
    with pytest.raises(ValueError):
        BnBConfig(workers=0)
    with pytest.raises(ValueError):
        BnBConfig(rel_gap=0)


def test_propagator_state_exclusivity():
    ir, _, _ = random_instance(0, "mil")
    comp = ir.compiled()
    prop = Propagator(comp)
    lb, ub = comp.lb.copy(), comp.ub.copy()
    t0 = ir.handles
    ub[t0["z_on"][0]] = 0.0
    lb[t0["z_off"][0]] = 1.0
    assert prop(lb, ub)
    assert ub[t0["z_sb"][0]] == 0.0
    assert np.all(ub[t0["z_seg"][:, 0]] == 0.0)
    lb[t0["z_on"][1]] = lb[t0["z_sb"][1]] = 1.0
    assert not prop(lb, ub)
