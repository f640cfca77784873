"""Primal-dual interior-point method for linear + second-order cone programs.

Solves::

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in K

where ``K`` is a nonnegative orthant of dimension ``dims["l"]`` followed by
second-order cones of sizes ``dims["q"]`` (``s0 >= ||s[1:]||``).

The method works on the homogeneous self-dual embedding, so infeasible and
unbounded problems end with a certificate instead of diverging. Search
directions use Nesterov-Todd scaling and a Mehrotra predictor-corrector
step. The Newton systems are reduced to a sparse quasi-definite system
``[[G'W^-2 G, A'], [A, 0]]`` factored once per iteration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass
class ConeProblem:
    c: np.ndarray
    A: sp.spmatrix
    b: np.ndarray
    G: sp.spmatrix
    h: np.ndarray
    dims: dict = field(default_factory=lambda: {"l": 0, "q": []})


@dataclass
class ConicResult:
    status: str  # optimal | primal_infeasible | dual_infeasible | unknown
    x: np.ndarray | None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    pcost: float = math.nan
    dcost: float = math.nan
    iterations: int = 0
    pres: float = math.nan
    dres: float = math.nan


# -- cone algebra -----------------------------------------------------------

class _Cone:
    """Index bookkeeping plus Jordan algebra on K.

    Second-order blocks of equal size are processed together: ``groups``
    maps a block size ``k`` to an ``(n_blocks, k)`` array of positions.
    """

    def __init__(self, dims):
        self.l = int(dims.get("l", 0))
        self.q = [int(k) for k in dims.get("q", [])]
        starts = {}
        start = self.l
        for k in self.q:
            starts.setdefault(k, []).append(start)
            start += k
        self.groups = {k: np.array(s)[:, None] + np.arange(k) for k, s in starts.items()}
        self.m = start
        self.degree = self.l + len(self.q)
        self.e = np.zeros(self.m)
        self.e[: self.l] = 1.0
        for idx in self.groups.values():
            self.e[idx[:, 0]] = 1.0

    def prod(self, u, v):
        out = np.empty_like(u)
        l = self.l
        out[:l] = u[:l] * v[:l]
        for idx in self.groups.values():
            a, b = u[idx], v[idx]
            out[idx[:, 0]] = np.sum(a * b, axis=1)
            out[idx[:, 1:]] = a[:, :1] * b[:, 1:] + b[:, :1] * a[:, 1:]
        return out

    def div(self, lam, r):
        """x with lam o x = r."""
        out = np.empty_like(r)
        l = self.l
        out[:l] = r[:l] / lam[:l]
        for idx in self.groups.values():
            a, b = lam[idx], r[idx]
            det = a[:, 0] ** 2 - np.sum(a[:, 1:] ** 2, axis=1)
            x0 = (a[:, 0] * b[:, 0] - np.sum(a[:, 1:] * b[:, 1:], axis=1)) / det
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (b[:, 1:] - x0[:, None] * a[:, 1:]) / a[:, :1]
        return out

    def min_eig(self, x):
        vals = [np.min(x[: self.l])] if self.l else []
        for idx in self.groups.values():
            v = x[idx]
            vals.append(np.min(v[:, 0] - np.linalg.norm(v[:, 1:], axis=1)))
        return min(vals) if vals else math.inf

    def max_step(self, x, d):
        """Largest alpha with x + alpha d in K (inf if unbounded)."""
        alpha = math.inf
        l = self.l
        if l:
            neg = d[:l] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-x[:l][neg] / d[:l][neg])))
        for idx in self.groups.values():
            alpha = min(alpha, _soc_steps(x[idx], d[idx]))
        return alpha


def _soc_steps(x, d):
    """Smallest positive root of ||x + a d||_J^2 = 0 over a batch of blocks."""
    a = d[:, 0] ** 2 - np.sum(d[:, 1:] ** 2, axis=1)
    b = 2.0 * (x[:, 0] * d[:, 0] - np.sum(x[:, 1:] * d[:, 1:], axis=1))
    c = np.maximum(x[:, 0] ** 2 - np.sum(x[:, 1:] ** 2, axis=1), 0.0)
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    q = -0.5 * (b + np.copysign(sq, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(a != 0, q / a, np.where(b < 0, -c / b, np.inf))
        r2 = np.where(q != 0, c / q, np.inf)
    valid = (disc >= 0) | (a == 0)
    r1 = np.where(valid & (r1 > 0), r1, np.inf)
    r2 = np.where(valid & (a != 0) & (r2 > 0), r2, np.inf)
    return float(min(np.min(r1), np.min(r2)))


class _Scaling:
    """Nesterov-Todd scaling W with W z = W^-1 s = lam."""

    def __init__(self, cone: _Cone, s, z):
        self.cone = cone
        l = cone.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.soc = {}
        for k, idx in cone.groups.items():
            sb, zb = s[idx], z[idx]
            sn = np.sqrt(np.maximum(sb[:, 0] ** 2 - np.sum(sb[:, 1:] ** 2, axis=1), 1e-300))
            zn = np.sqrt(np.maximum(zb[:, 0] ** 2 - np.sum(zb[:, 1:] ** 2, axis=1), 1e-300))
            ss, zs = sb / sn[:, None], zb / zn[:, None]
            gamma = np.sqrt(np.maximum((1.0 + np.sum(ss * zs, axis=1)) / 2.0, 1e-300))
            w = np.empty_like(ss)
            w[:, 0] = (ss[:, 0] + zs[:, 0]) / (2 * gamma)
            w[:, 1:] = (ss[:, 1:] - zs[:, 1:]) / (2 * gamma[:, None])
            self.soc[k] = (np.sqrt(sn / zn), w)
        self.lam = self.apply(z)

    def apply(self, v, inverse=False):
        out = np.empty_like(v)
        l = self.cone.l
        out[:l] = v[:l] / self.d if inverse else v[:l] * self.d
        for k, idx in self.cone.groups.items():
            beta, w = self.soc[k]
            vb = v[idx]
            w0, w1 = w[:, 0], w[:, 1:]
            t = np.sum(w1 * vb[:, 1:], axis=1)
            if inverse:
                out[idx[:, 0]] = (w0 * vb[:, 0] - t) / beta
                out[idx[:, 1:]] = (vb[:, 1:] + (t / (1 + w0) - vb[:, 0])[:, None] * w1) / beta[:, None]
            else:
                out[idx[:, 0]] = beta * (w0 * vb[:, 0] + t)
                out[idx[:, 1:]] = beta[:, None] * (vb[:, 1:] + (t / (1 + w0) + vb[:, 0])[:, None] * w1)
        return out

    def inv_matrix_rows(self, G):
        """W^-1 G (dense in, dense out; sparse otherwise)."""
        l = self.cone.l
        if isinstance(G, np.ndarray):
            H = np.empty_like(G)
            H[:l] = G[:l] / self.d[:, None]
            for k, idx in self.cone.groups.items():
                beta, w = self.soc[k]
                Gb = G[idx]
                w0, w1 = w[:, 0], w[:, 1:]
                t = np.einsum("bi,bin->bn", w1, Gb[:, 1:])
                H[idx[:, 0]] = (w0[:, None] * Gb[:, 0] - t) / beta[:, None]
                H[idx[:, 1:]] = (
                    Gb[:, 1:] + w1[:, :, None] * (t / (1 + w0)[:, None] - Gb[:, 0])[:, None, :]
                ) / beta[:, None, None]
            return H
        rows = [sp.diags(1.0 / self.d) @ G[:l]] if l else []
        order = [np.arange(l)]
        for k, idx in self.cone.groups.items():
            beta, w = self.soc[k]
            for bi in range(idx.shape[0]):
                w0, w1 = w[bi, 0], w[bi, 1:]
                Winv = np.empty((k, k))
                Winv[0, 0] = w0
                Winv[0, 1:] = -w1
                Winv[1:, 0] = -w1
                Winv[1:, 1:] = np.eye(k - 1) + np.outer(w1, w1) / (1 + w0)
                Winv /= beta[bi]
                rows.append(sp.csr_matrix(Winv) @ G[idx[bi]])
                order.append(idx[bi])
        H = sp.vstack(rows, format="csr")
        perm = np.empty(self.cone.m, dtype=np.int64)
        perm[np.concatenate(order)] = np.arange(self.cone.m)
        return H[perm]


_TRACE = False

# -- main loop ------------------------------------------------------------

def solve_conic(prob: ConeProblem, tol: float = 1e-9, max_iter: int = 80, reg: float = 1e-11) -> ConicResult:
    """Run the interior-point method; see the module docstring for the problem form."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _solve(prob, tol, max_iter, reg)


DENSE_LIMIT = 600


def _solve(prob, tol, max_iter, reg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return _iterate(prob, tol, max_iter, reg)


def _iterate(prob, tol, max_iter, reg):
    c = np.asarray(prob.c, dtype=float)
    n = c.size
    A = sp.csr_matrix(prob.A, dtype=float) if prob.A is not None else sp.csr_matrix((0, n))
    G = sp.csr_matrix(prob.G, dtype=float)
    dense = n + A.shape[0] <= DENSE_LIMIT
    if dense:
        A, G = A.toarray(), G.toarray()
    b = np.asarray(prob.b, dtype=float).reshape(-1)
    h = np.asarray(prob.h, dtype=float).reshape(-1)
    cone = _Cone(prob.dims)
    p, m = A.shape[0], G.shape[0]
    if m != cone.m:
        raise ValueError("G rows do not match cone dimensions")
    At, Gt = (A.T, G.T) if dense else (A.T.tocsr(), G.T.tocsr())

    def kkt_dense(H):
        M = H.T @ H
        K = np.zeros((n + p, n + p))
        K[:n, :n] = M
        K[:n, n:] = A.T
        K[n:, :n] = A
        Kexact = K.copy()
        K[np.arange(n), np.arange(n)] += reg
        K[np.arange(n, n + p), np.arange(n, n + p)] -= reg
        lu = sla.lu_factor(K, check_finite=False)

        def solve(r):
            sol = sla.lu_solve(lu, r, check_finite=False)
            for _ in range(3):
                res = r - Kexact @ sol
                if np.linalg.norm(res, np.inf) <= 1e-14 * (1 + np.linalg.norm(r, np.inf)):
                    break
                sol = sol + sla.lu_solve(lu, res, check_finite=False)
            return sol

        return solve

    def kkt_factory(H):
        if dense:
            return kkt_dense(H)
        M = (H.T @ H).tocsc()
        K = sp.bmat([[M + reg * sp.eye(n), A.T], [A, -reg * sp.eye(p) if p else None]], format="csc")
        Kexact = sp.bmat([[M, A.T], [A, None]], format="csc") if p else M
        lu = spla.splu(K)

        def solve(r):
            sol = lu.solve(r)
            for _ in range(3):
                res = r - Kexact @ sol
                if np.linalg.norm(res, np.inf) <= 1e-14 * (1 + np.linalg.norm(r, np.inf)):
                    break
                sol = sol + lu.solve(res)
            return sol

        return solve

    def solve_k(factor, H, scaling, r1, r2, r3):
        """Solve [[0,A',G'],[A,0,0],[G,0,-W^2]] [dx;dy;dz] = [r1;r2;r3]."""
        w3 = scaling.apply(r3, inverse=True)
        rhs = np.concatenate([r1 + H.T @ w3, r2])
        sol = factor(rhs)
        dx, dy = sol[:n], sol[n:]
        dz = scaling.apply(H @ dx - w3, inverse=True)
        return dx, dy, dz

    # starting point from W = I
    class _Id:
        def apply(self, v, inverse=False):
            return v

    ident = _Id()
    factor0 = kkt_factory(G)
    x, _, zneg = solve_k(factor0, G, ident, np.zeros(n), b, h)
    s = -zneg
    _, y, z = solve_k(factor0, G, ident, -c, np.zeros(p), np.zeros(m))
    if m:
        ts = -cone.min_eig(s)
        if ts >= -1e-8 * max(np.linalg.norm(s), 1.0):
            s = s + (1.0 + ts) * cone.e
        tz = -cone.min_eig(z)
        if tz >= -1e-8 * max(np.linalg.norm(z), 1.0):
            z = z + (1.0 + tz) * cone.e
    tau, kappa = 1.0, 1.0
    nb = max(1.0, np.linalg.norm(b))
    nh = max(1.0, np.linalg.norm(h))
    nc = max(1.0, np.linalg.norm(c))

    best = None
    for it in range(max_iter + 1):
        ra = At @ y + Gt @ z + c * tau
        rb = -(A @ x) + b * tau
        rc = -(G @ x) + h * tau - s
        cx, by, hz = c @ x, b @ y, h @ z
        rd = -cx - by - hz - kappa
        mu = (s @ z + tau * kappa) / (cone.degree + 1)
        pres = max(np.linalg.norm(rb) / nb, np.linalg.norm(rc) / nh) / tau
        dres = np.linalg.norm(ra) / nc / tau
        pcost, dcost = cx / tau, -(by + hz) / tau
        gap = (s @ z) / tau**2
        relgap = abs(pcost - dcost) / max(1.0, abs(pcost))
        if best is None or max(pres, dres, relgap) < best[0]:
            best = (max(pres, dres, relgap), x / tau, y / tau, z / tau, s / tau, pcost, dcost, pres, dres)
        if _TRACE: print(it, f"{pres:.2e} {dres:.2e} {gap:.2e} {relgap:.2e} tau={tau:.2e} k={kappa:.2e}")
        if pres <= tol and dres <= tol and (gap <= tol or relgap <= tol):
            return ConicResult("optimal", x / tau, y / tau, z / tau, s / tau, pcost, dcost, it, pres, dres)
        if by + hz < 0:
            pinf = np.linalg.norm(At @ y + Gt @ z) / nc / (-(by + hz))
            if pinf <= tol:
                return ConicResult("primal_infeasible", None, y / -(by + hz), z / -(by + hz), iterations=it)
        if cx < 0:
            dinf = max(np.linalg.norm(A @ x) / nb, np.linalg.norm(G @ x + s) / nh) / (-cx)
            if dinf <= tol:
                return ConicResult("dual_infeasible", x / -cx, iterations=it)
        if it == max_iter:
            break

        try:
            W = _Scaling(cone, s, z)
            H = W.inv_matrix_rows(G)
            factor = kkt_factory(H)
        except (RuntimeError, FloatingPointError, ValueError, np.linalg.LinAlgError):
            break
        lam = W.lam
        vx, vy, vz = solve_k(factor, H, W, -c, b, h)
        cv = c @ vx + b @ vy + h @ vz

        def direction(eta, r_c, r_t):
            q = cone.div(lam, r_c)
            ux, uy, uz = solve_k(factor, H, W, -eta * ra, eta * rb, eta * rc - W.apply(q))
            cu = c @ ux + b @ uy + h @ uz
            dtau = (-eta * rd + cu + r_t / tau) / (kappa / tau - cv)
            dx, dy, dz = ux + dtau * vx, uy + dtau * vy, uz + dtau * vz
            ds = eta * rc + h * dtau - G @ dx
            dkappa = (r_t - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def step_len(ds, dz, dtau, dkappa):
            a = min(cone.max_step(s, ds), cone.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        dxa, dya, dza, dsa, dta, dka = direction(1.0, -cone.prod(lam, lam), -tau * kappa)
        alpha_aff = min(1.0, step_len(dsa, dza, dta, dka))
        sigma = (1.0 - alpha_aff) ** 3
        # corrector
        corr = cone.prod(W.apply(dsa, inverse=True), W.apply(dza))
        r_c = -cone.prod(lam, lam) + sigma * mu * cone.e - corr
        r_t = -tau * kappa + sigma * mu - dta * dka
        dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, r_c, r_t)
        alpha = min(1.0, 0.99 * step_len(ds, dz, dtau, dkappa))
        x, y, z, s = x + alpha * dx, y + alpha * dy, z + alpha * dz, s + alpha * ds
        tau, kappa = tau + alpha * dtau, kappa + alpha * dkappa
        if not (np.all(np.isfinite(x)) and tau > 0 and kappa > 0):
            break

    if best is not None and best[0] <= 1e-6:
        _, bx, byy, bz, bs, pc, dc, pr, dr = best
        return ConicResult("optimal_inaccurate", bx, byy, bz, bs, pc, dc, max_iter, pr, dr)
    return ConicResult("unknown", None, iterations=max_iter)
