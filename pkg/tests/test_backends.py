import numpy as np
import pytest

from h2sched.solver import BACKENDS, enumerate_solve, BackendError, HighsBackend, IPMBackend, OABackend, get_backend

from instances import random_instance


def _relax(ir, backend):
    comp = ir.compiled()
    return backend.open(comp).solve(comp.lb.copy(), comp.ub.copy())


@pytest.mark.parametrize("kind", ["mil", "l"])
@pytest.mark.parametrize("seed", range(3))
def test_linear_relaxations_agree(kind, seed):
    ir, _, _ = random_instance(seed, kind)
    vals = [_relax(ir, be).objective for be in (HighsBackend(), IPMBackend(), OABackend())]
    assert max(vals) - min(vals) <= 1e-6 * (1 + abs(vals[0]))


@pytest.mark.parametrize("kind", ["soc", "misoc"])
@pytest.mark.parametrize("seed", range(3))
def test_conic_relaxations_agree(kind, seed):
    ir, _, _ = random_instance(seed, kind)
    a = _relax(ir, IPMBackend())
    b = _relax(ir, OABackend(perspective=False))
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, abs=1e-6 * (1 + abs(a.objective)))


@pytest.mark.parametrize("kind", ["soc", "misoc"])
@pytest.mark.parametrize("seed", range(3))
def test_perspective_cuts_tighten_but_stay_valid(kind, seed):
    ir, _, _ = random_instance(seed, kind)
    plain = _relax(ir, OABackend(perspective=False)).objective
    persp = _relax(ir, OABackend()).objective
    opt = enumerate_solve(ir).objective
    assert opt - 1e-6 <= persp <= plain + 1e-6


def test_fixed_binaries_infeasible():
    ir, _, _ = random_instance(0, "l")
    comp = ir.compiled()
    lb, ub = comp.lb.copy(), comp.ub.copy()
    z_on, z_off = ir.handles["z_on"][0], ir.handles["z_off"][0]
    lb[z_on] = lb[z_off] = 1.0
    for be in (HighsBackend(), IPMBackend()):
        assert be.open(comp).solve(lb, ub).status == "infeasible"


def test_registry():
    assert set(BACKENDS) == {"highs", "ipm", "oa", "auto"}
    assert isinstance(get_backend("ipm"), IPMBackend)
    be = HighsBackend()
    assert get_backend(be) is be
    with pytest.raises(BackendError):
        get_backend("gurobi")


def test_oa_point_is_feasible():
    ir, _, _ = random_instance(1, "soc")
    res = _relax(ir, OABackend())
    comp = ir.compiled()
    for si, sa, li, la, rhs in comp.quad:
        assert sa @ res.x[si] ** 2 + la @ res.x[li] - rhs >= -1e-8
    assert np.all(res.x >= comp.lb - 1e-9)
