"""Continuous-relaxation backends.

A backend turns a :class:`~h2sched.ir.CompiledProblem` into a *session*
(``backend.open(compiled)``) that solves the continuous relaxation for
arbitrary variable bounds (``session.solve(lb, ub)``). Branch-and-bound
keeps one session per worker and only changes bounds between calls.

``highs``  LP simplex through HiGHS, warm-started between nodes. Linear only.
``ipm``    the bundled conic interior-point method; linear + cone constraints.
``oa``     HiGHS plus tangent cuts for the concave-quadratic constraints.
``auto``   ``highs`` for linear problems, ``oa`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..ir import CompiledProblem
from .conic import ConeProblem, solve_conic


class BackendError(RuntimeError):
    pass


class CapabilityError(BackendError):
    pass


@dataclass
class RelaxResult:
    status: str  # optimal | infeasible | error
    objective: float = -math.inf
    x: np.ndarray | None = None
    message: str = ""


class Backend:
    name = "abstract"
    conic = False

    def supports(self, comp: CompiledProblem) -> bool:
        return self.conic or not comp.has_conic

    def open(self, comp: CompiledProblem):
        raise NotImplementedError

    def __repr__(self):
        return f"<backend {self.name}>"


# ---------------------------------------------------------------------------
# HiGHS
# ---------------------------------------------------------------------------

class HighsBackend(Backend):
    name = "highs"
    conic = False

    def __init__(self, feastol: float = 1e-9):
        self.feastol = feastol

    def open(self, comp):
        if comp.has_conic:
            raise CapabilityError("highs backend handles linear problems only")
        return _HighsSession(comp, self.feastol)


class _HighsSession:
    def __init__(self, comp: CompiledProblem, feastol: float):
        import highspy

        self.hs = highspy
        self.comp = comp
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("threads", 1)
        h.setOptionValue("primal_feasibility_tolerance", feastol)
        h.setOptionValue("dual_feasibility_tolerance", feastol)
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_ = comp.n
        lp.num_row_ = comp.A.shape[0]
        lp.col_cost_ = comp.c
        lp.col_lower_ = np.where(np.isfinite(comp.lb), comp.lb, -inf)
        lp.col_upper_ = np.where(np.isfinite(comp.ub), comp.ub, inf)
        lp.row_lower_ = np.where(np.isfinite(comp.row_lo), comp.row_lo, -inf)
        lp.row_upper_ = np.where(np.isfinite(comp.row_hi), comp.row_hi, inf)
        lp.offset_ = comp.c0
        lp.sense_ = highspy.ObjSense.kMaximize
        csc = comp.A.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        h.passModel(lp)
        self.h = h
        self.lb = comp.lb.copy()
        self.ub = comp.ub.copy()
        self.inf = inf

    def solve(self, lb, ub) -> RelaxResult:
        changed = np.flatnonzero((lb != self.lb) | (ub != self.ub))
        if changed.size:
            self.h.changeColsBounds(
                changed.size, changed.astype(np.int32),
                np.where(np.isfinite(lb[changed]), lb[changed], -self.inf),
                np.where(np.isfinite(ub[changed]), ub[changed], self.inf),
            )
            self.lb, self.ub = lb.copy(), ub.copy()
        if np.any(lb > ub):
            return RelaxResult("infeasible")
        self.h.run()
        st = self.h.getModelStatus()
        M = self.hs.HighsModelStatus
        if st == M.kOptimal:
            x = np.clip(np.array(self.h.getSolution().col_value), lb, ub)
            return RelaxResult("optimal", float(self.h.getInfo().objective_function_value), x)
        if st in (M.kInfeasible, M.kUnboundedOrInfeasible):
            return RelaxResult("infeasible")
        # retry once from scratch before giving up
        self.h.clearSolver()
        self.h.run()
        if self.h.getModelStatus() == M.kOptimal:
            x = np.clip(np.array(self.h.getSolution().col_value), lb, ub)
            return RelaxResult("optimal", float(self.h.getInfo().objective_function_value), x)
        if self.h.getModelStatus() in (M.kInfeasible, M.kUnboundedOrInfeasible):
            return RelaxResult("infeasible")
        return RelaxResult("error", message=self.h.modelStatusToString(st))


# ---------------------------------------------------------------------------
# Interior point
# ---------------------------------------------------------------------------

class IPMBackend(Backend):
    """Bundled conic interior-point method with a small presolve.

    The presolve removes fixed variables, turns single-variable rows into
    bounds (repeating until nothing changes) and drops rows left without
    free variables. Each concave-quadratic record ``sum a_k x_k^2 + l.x >=
    rhs`` becomes the second-order cone
    ``||(R x, (t - 1)/2)|| <= (t + 1)/2`` with ``R = diag(sqrt(-a))`` and
    ``t = l.x - rhs``.
    """

    name = "ipm"
    conic = True

    def __init__(self, tol: float = 1e-9, max_iter: int = 80):
        self.tol = tol
        self.max_iter = max_iter

    def open(self, comp):
        return _IPMSession(comp, self.tol, self.max_iter)


class _IPMSession:
    def __init__(self, comp: CompiledProblem, tol: float, max_iter: int):
        self.comp = comp
        self.tol = tol
        self.max_iter = max_iter
        self.A = comp.A.tocsr()
        self.pattern = (abs(self.A) > 0).astype(np.float64).tocsr()

    def presolve(self, lb, ub, feastol=1e-9):
        """Tighten bounds; returns (lb, ub, active_rows) or None if infeasible."""
        comp, A = self.comp, self.A
        lb, ub = lb.astype(float).copy(), ub.astype(float).copy()
        lo, hi = comp.row_lo, comp.row_hi
        active = np.ones(A.shape[0], dtype=bool)
        for _ in range(50):
            if np.any(lb > ub + feastol):
                return None
            close = ub - lb <= feastol
            mid = np.where(close, 0.5 * (lb + ub), 0.0)
            lb = np.where(close, mid, lb)
            ub = np.where(close, mid, ub)
            fixed = lb == ub
            free = ~fixed
            k = A @ np.where(fixed, lb, 0.0)
            cnt = self.pattern @ free.astype(np.float64)
            empty = active & (cnt == 0)
            if np.any(empty):
                if np.any(k[empty] < lo[empty] - feastol) or np.any(k[empty] > hi[empty] + feastol):
                    return None
                active &= ~empty
            single = np.flatnonzero(active & (cnt == 1))
            if single.size == 0:
                break
            sub = (A[single] @ sp.diags(free.astype(np.float64))).tocsr()
            sub.eliminate_zeros()
            j = sub.indices
            a = sub.data
            rlo = (lo[single] - k[single]) / a
            rhi = (hi[single] - k[single]) / a
            new_lo = np.where(a > 0, rlo, rhi)
            new_hi = np.where(a > 0, rhi, rlo)
            np.maximum.at(lb, j, new_lo)
            np.minimum.at(ub, j, new_hi)
            active[single] = False
        if np.any(lb > ub + feastol):
            return None
        return lb, ub, active

    def solve(self, lb, ub) -> RelaxResult:
        comp = self.comp
        pre = self.presolve(lb, ub)
        if pre is None:
            return RelaxResult("infeasible")
        lb, ub, active = pre
        fixed = lb == ub
        free = np.flatnonzero(~fixed)
        xfix = np.where(fixed, lb, 0.0)
        pos = -np.ones(comp.n, dtype=np.int64)
        pos[free] = np.arange(free.size)
        nf = free.size

        eq_rows, g_rows, g_rhs = [], [], []
        k = self.A @ xfix
        Af = self.A[:, free]
        rows = np.flatnonzero(active)
        eq = rows[comp.row_lo[rows] == comp.row_hi[rows]]
        A_eq = Af[eq]
        b_eq = comp.row_hi[eq] - k[eq]
        ineq = rows[comp.row_lo[rows] != comp.row_hi[rows]]
        up = ineq[np.isfinite(comp.row_hi[ineq])]
        dn = ineq[np.isfinite(comp.row_lo[ineq])]
        blocks = [Af[up], -Af[dn]]
        hs = [comp.row_hi[up] - k[up], -(comp.row_lo[dn] - k[dn])]
        lbf, ubf = lb[free], ub[free]
        fl = np.flatnonzero(np.isfinite(lbf))
        fu = np.flatnonzero(np.isfinite(ubf))
        blocks.append(-sp.csr_matrix((np.ones(fl.size), (np.arange(fl.size), fl)), shape=(fl.size, nf)))
        hs.append(-lbf[fl])
        blocks.append(sp.csr_matrix((np.ones(fu.size), (np.arange(fu.size), fu)), shape=(fu.size, nf)))
        hs.append(ubf[fu])

        soc_blocks, soc_h, soc_dims = [], [], []
        for (si, sa, li, la, rhs) in comp.quad:
            sfree = pos[si] >= 0
            lfree = pos[li] >= 0
            const = float(np.sum(sa[~sfree] * xfix[si[~sfree]] ** 2) + np.sum(la[~lfree] * xfix[li[~lfree]]))
            kap = const - rhs
            L = np.zeros(nf)
            np.add.at(L, pos[li[lfree]], la[lfree])
            if not np.any(sfree):
                if not np.any(L != 0):
                    if kap < -1e-9:
                        return RelaxResult("infeasible")
                    continue
                blocks.append(sp.csr_matrix(-L))
                hs.append(np.array([kap]))
                continue
            R = np.sqrt(-sa[sfree])
            cols = pos[si[sfree]]
            m = 2 + cols.size
            G = np.zeros((m, nf))
            G[0] = -L / 2
            G[1] = -L / 2
            G[2 + np.arange(cols.size), cols] = -R
            soc_blocks.append(sp.csr_matrix(G))
            soc_h.append(np.concatenate([[(kap + 1) / 2, (kap - 1) / 2], np.zeros(cols.size)]))
            soc_dims.append(m)

        c_full = comp.c
        c0 = float(c_full @ xfix) + comp.c0
        if nf == 0:
            return RelaxResult("optimal", c0, xfix)
        Gl = sp.vstack(blocks, format="csr")
        G = sp.vstack([Gl] + soc_blocks, format="csr") if soc_blocks else Gl
        h = np.concatenate(hs + soc_h)
        cscale = max(1.0, float(np.max(np.abs(c_full[free]))))
        prob = ConeProblem(-c_full[free] / cscale, A_eq, b_eq, G, h, {"l": Gl.shape[0], "q": soc_dims})
        res = solve_conic(prob, tol=self.tol, max_iter=self.max_iter)
        if res.status in ("optimal", "optimal_inaccurate"):
            x = xfix.copy()
            x[free] = res.x
            x = np.clip(x, lb, ub)
            return RelaxResult("optimal", float(c_full @ x) + comp.c0, x, res.status)
        if res.status == "primal_infeasible":
            return RelaxResult("infeasible")
        if res.status == "dual_infeasible":
            return RelaxResult("error", message="relaxation unbounded")
        return RelaxResult("error", message=f"interior point stalled after {res.iterations} iterations")


# ---------------------------------------------------------------------------
# Outer approximation
# ---------------------------------------------------------------------------

class OABackend(Backend):
    """HiGHS LP with tangent cuts for the concave-quadratic records.

    Since every square coefficient is negative,
    ``a x^2 <= a (2 x0 x - x0^2)`` for any ``x0``, so each tangent cut is
    valid and is kept for later solves. A solve alternates LP solves and
    cut rounds until no record is violated by more than ``tol``.

    When a squared variable ``x >= 0`` is switched by a binary ``z`` through
    a row ``x - U z <= 0``, the constant of its tangent is multiplied by
    ``z``: ``a x^2 <= a (2 x0 x - x0^2 z)``. For ``z = 1`` this is the plain
    tangent and for ``z = 0`` both sides vanish, so the cut is valid for
    every mixed-integer solution and tighter when ``z`` is fractional.
    The LP value is therefore an upper bound on the mixed-integer optimum
    within the node, and equals the continuous relaxation once the
    switching binaries are fixed. Switched variables start with
    ``seed_cuts`` tangents spread over ``[0, U]``.
    """

    name = "oa"
    conic = True

    def __init__(self, tol: float = 1e-9, max_rounds: int = 400, perspective: bool = True, seed_cuts: int = 6):
        self.tol = tol
        self.max_rounds = max_rounds
        self.perspective = perspective
        self.seed_cuts = seed_cuts

    def open(self, comp):
        return _OASession(comp, self.tol, self.max_rounds, self.perspective, self.seed_cuts)


class _OASession(_HighsSession):
    def __init__(self, comp: CompiledProblem, tol: float, max_rounds: int, perspective: bool = True, seed_cuts: int = 6):
        lin = CompiledProblem(
            comp.n, comp.c, comp.c0, comp.lb, comp.ub, comp.binary, comp.A, comp.row_lo, comp.row_hi, [], [], []
        )
        super().__init__(lin, 1e-10)
        self.comp = comp
        self.tol = tol
        self.max_rounds = max_rounds
        nq = len(comp.quad)
        r_s, c_s, v_s, r_l, c_l, v_l = [], [], [], [], [], []
        for i, (si, sa, li, la, _) in enumerate(comp.quad):
            r_s += [i] * si.size
            c_s += list(si)
            v_s += list(sa)
            r_l += [i] * li.size
            c_l += list(li)
            v_l += list(la)
        self.S = sp.csr_matrix((v_s, (r_s, c_s)), shape=(nq, comp.n))
        self.L = sp.csr_matrix((v_l, (r_l, c_l)), shape=(nq, comp.n))
        self.rhs = np.array([q[4] for q in comp.quad])
        self.switch = _switching_binaries(comp) if perspective else {}
        self.cuts = 0
        if self.switch and seed_cuts > 0:
            self._seed(seed_cuts)

    def _seed(self, k):
        S = self.S.tocoo()
        for frac in np.linspace(0.0, 1.0, k + 2)[1:-1]:
            x0 = np.zeros(self.comp.n)
            for j in set(S.col.tolist()):
                if j in self.switch:
                    x0[j] = frac * self.switch[j][1]
            self._add_cuts(np.arange(self.S.shape[0]), x0)

    def _add_cuts(self, rows, x):
        """Tangent cuts of the given records at x, in perspective form where possible."""
        S, L = self.S[rows].tocoo(), self.L[rows]
        # sum 2 a x0 x + l.x >= rhs + sum a x0^2, with a x0^2 moved onto z for switched x
        grad = (sp.csr_matrix((2.0 * S.data * x[S.col], (S.row, S.col)), shape=S.shape) + L).tolil()
        lo = self.rhs[rows].astype(float).copy()
        for r, j, a in zip(S.row, S.col, S.data):
            const = a * x[j] * x[j]
            if j in self.switch:
                grad[r, self.switch[j][0]] -= const
            else:
                lo[r] += const
        grad = grad.tocsr()
        self.h.addRows(
            len(rows), lo, np.full(len(rows), self.inf), grad.nnz,
            grad.indptr[:-1].astype(np.int32), grad.indices.astype(np.int32), grad.data,
        )
        self.cuts += len(rows)

    def solve(self, lb, ub) -> RelaxResult:
        for _ in range(self.max_rounds):
            res = super().solve(lb, ub)
            if res.status != "optimal":
                return res
            x = res.x
            g = self.S @ (x * x) + self.L @ x - self.rhs
            bad = np.flatnonzero(g < -self.tol)
            if bad.size == 0:
                return res
            self._add_cuts(bad, x)
        if np.min(g) >= -1e-6:
            return RelaxResult("optimal", res.objective, res.x, "cut rounds exhausted")
        return RelaxResult("error", message="outer approximation did not converge")


def _switching_binaries(comp: CompiledProblem) -> dict:
    """Squared variables ``x >= 0`` with a row ``x - U z <= 0``, z binary.

    Returns ``{x: (z, U)}``; the first such row found is used.
    """
    squared = set()
    for si, *_ in comp.quad:
        squared.update(int(j) for j in si)
    A = comp.A.tocsr()
    out = {}
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        if cols.size != 2 or comp.row_hi[i] != 0.0 or np.isfinite(comp.row_lo[i]):
            continue
        vals = A.data[A.indptr[i] : A.indptr[i + 1]]
        for k in (0, 1):
            x, z = int(cols[k]), int(cols[1 - k])
            if x in squared and x not in out and comp.binary[z] and vals[k] > 0 > vals[1 - k] and comp.lb[x] >= 0:
                out[x] = (z, -vals[1 - k] / vals[k])
    return out


class AutoBackend(Backend):
    """HiGHS for linear problems, outer approximation for conic ones."""

    name = "auto"
    conic = True

    def open(self, comp):
        return (OABackend() if comp.has_conic else HighsBackend()).open(comp)


BACKENDS = {"highs": HighsBackend, "ipm": IPMBackend, "oa": OABackend, "auto": AutoBackend}


def get_backend(spec) -> Backend:
    if isinstance(spec, Backend):
        return spec
    if spec is None:
        spec = "auto"
    try:
        return BACKENDS[spec]()
    except KeyError:
        raise BackendError(f"unknown backend {spec!r}; choose from {sorted(BACKENDS)}") from None
