"""Exhaustive enumeration of binary assignments (test oracle)."""

from __future__ import annotations

import math
import time

import numpy as np

from ..ir import ProblemIR
from .backends import BackendError, get_backend
from .bnb import SolveResult


class EnumerationError(ValueError):
    pass


def enumerate_solve(ir: ProblemIR, backend="auto", max_binaries: int = 20) -> SolveResult:
    """Exact optimum by trying every binary assignment.

    Binaries fixed by their bounds do not count towards ``max_binaries``.
    Assignments are built depth-first in index order; a linear row whose
    variables are all binary is checked as soon as its last variable is
    assigned, which discards combinations violating the state exclusivity
    and segment selection rows before any continuous solve. Every surviving
    complete assignment is solved with the continuous backend.
    """
    t0 = time.perf_counter()
    comp = ir.compiled()
    be = get_backend(backend)
    session = be.open(comp)
    bins = np.flatnonzero(comp.binary)
    free = bins[comp.lb[bins] < comp.ub[bins]]
    if free.size > max_binaries:
        raise EnumerationError(f"{free.size} free binaries exceed the enumeration limit of {max_binaries}")
    order = {int(j): k for k, j in enumerate(free)}

    A = comp.A.tocsr()
    checks: list[list[tuple]] = [[] for _ in range(free.size)]
    static = []
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        vals = A.data[A.indptr[i] : A.indptr[i + 1]]
        if cols.size == 0 or not np.all(comp.binary[cols]):
            continue
        row = (cols, vals, comp.row_lo[i], comp.row_hi[i])
        last = max((order[int(j)] for j in cols if int(j) in order), default=None)
        (static if last is None else checks[last]).append(row)

    x = comp.lb.copy()
    tol = 1e-9

    def ok(row):
        cols, vals, lo, hi = row
        act = float(vals @ x[cols])
        return lo - tol <= act <= hi + tol

    best_obj, best_x, leaves = -math.inf, None, 0
    if not all(ok(r) for r in static):
        return SolveResult("infeasible", math.nan, -math.inf, None, 0, time.perf_counter() - t0)

    def leaf():
        nonlocal best_obj, best_x, leaves
        leaves += 1
        lb, ub = comp.lb.copy(), comp.ub.copy()
        lb[bins] = ub[bins] = x[bins]
        res = session.solve(lb, ub)
        if res.status == "error":
            raise BackendError(f"enumeration leaf {leaves}: {res.message}")
        if res.status == "optimal" and res.objective > best_obj:
            best_obj, best_x = res.objective, res.x

    def walk(k):
        if k == free.size:
            leaf()
            return
        j = free[k]
        for v in (0.0, 1.0):
            x[j] = v
            if all(ok(r) for r in checks[k]):
                walk(k + 1)
        x[j] = comp.lb[j]

    walk(0)
    wall = time.perf_counter() - t0
    if best_x is None:
        return SolveResult("infeasible", math.nan, -math.inf, None, leaves, wall)
    return SolveResult("optimal", best_obj, best_obj, best_x, leaves, wall, best_obj)
