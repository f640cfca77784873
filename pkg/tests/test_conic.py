import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from h2sched.solver.conic import ConeProblem, solve_conic


def _prob(c, G, h, l, q, A=None, b=None):
    n = len(c)
    A = sp.csr_matrix((0, n)) if A is None else sp.csr_matrix(A)
    b = np.zeros(0) if b is None else np.asarray(b, float)
    return ConeProblem(np.asarray(c, float), A, b, sp.csr_matrix(G), np.asarray(h, float), {"l": l, "q": q})


def test_unit_disc():
    # minimize -x - y with x^2 + y^2 <= 1
    res = solve_conic(_prob([-1, -1], [[0, 0], [-1, 0], [0, -1]], [1, 0, 0], 0, [3]))
    assert res.status == "optimal"
    assert res.pcost == pytest.approx(-math.sqrt(2), abs=1e-7)
    assert np.allclose(res.x, [1 / math.sqrt(2)] * 2, atol=1e-6)


def test_linear_program_with_equality():
    # minimize x + 2y, x + y = 1, x, y >= 0
    res = solve_conic(_prob([1, 2], [[-1, 0], [0, -1]], [0, 0], 2, [], A=[[1, 1]], b=[1]))
    assert res.status == "optimal"
    assert res.pcost == pytest.approx(1.0, abs=1e-8)


def test_primal_infeasible():
    # x >= 2 and x <= 1
    res = solve_conic(_prob([1], [[-1], [1]], [-2, 1], 2, []))
    assert res.status == "primal_infeasible"


def test_unbounded():
    res = solve_conic(_prob([-1], [[-1]], [0], 1, []))
    assert res.status == "dual_infeasible"


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 4))
def test_projection_onto_ball(px, py, radius):
    # minimize t with ||(x, y) - p|| <= t and ||(x, y)|| <= radius
    G = [[-1, 0, 0], [0, -1, 0], [0, 0, -1], [0, 0, 0], [0, -1, 0], [0, 0, -1]]
    h = [0, -px, -py, radius, 0, 0]
    res = solve_conic(_prob([1, 0, 0], G, h, 0, [3, 3]))
    assert res.status == "optimal"
    expected = max(0.0, math.hypot(px, py) - radius)
    assert res.pcost == pytest.approx(expected, abs=1e-6)
