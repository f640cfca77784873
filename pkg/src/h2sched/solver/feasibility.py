"""Constraint-by-constraint feasibility report for a candidate point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ir import ProblemIR


@dataclass(frozen=True)
class Violation:
    name: str
    kind: str  # bound | integrality | linear | quadratic | cone
    amount: float


def check_feasibility(ir: ProblemIR, point, tol: float = 1e-6, int_tol: float | None = None) -> list[Violation]:
    """List every constraint violated by more than ``tol``.

    Bounds are reported as ``bound:<variable>``; binaries farther than
    ``int_tol`` (default ``tol``) from 0/1 as ``integrality:<variable>``.
    An empty list means the point is feasible.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (ir.n_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({ir.n_vars},)")
    int_tol = tol if int_tol is None else int_tol
    out = []
    for j, v in enumerate(ir.variables):
        amt = max(v.lb - x[j], x[j] - v.ub, 0.0)
        if amt > tol:
            out.append(Violation(f"bound:{v.name}", "bound", amt))
        if v.binary:
            frac = abs(x[j] - round(x[j]))
            if frac > int_tol:
                out.append(Violation(f"integrality:{v.name}", "integrality", frac))
    for con in ir.linear:
        amt = con.violation(x)
        if amt > tol:
            out.append(Violation(con.name, "linear", amt))
    for q in ir.quadratic:
        amt = q.violation(x)
        if amt > tol:
            out.append(Violation(q.name, "quadratic", amt))
    for k in ir.cones:
        amt = k.violation(x)
        if amt > tol:
            out.append(Violation(k.name, "cone", amt))
    return out
