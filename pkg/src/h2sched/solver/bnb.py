"""Branch-and-bound over the binary variables of a ProblemIR."""

from __future__ import annotations

import heapq
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..ir import CompiledProblem, ProblemIR
from .backends import BackendError, CapabilityError, RelaxResult, get_backend


@dataclass(frozen=True)
class BnBConfig:
    """Tree-search settings.

    Attributes:
        rel_gap: stop when ``bound - incumbent <= rel_gap * max(1, |bound|)``.
        int_tol: a binary within this distance of 0/1 counts as integral.
        node_limit: maximum number of processed nodes (``None`` = no limit).
        time_limit: wall-clock limit in seconds (``None`` = no limit).
        node_selection: ``"best-bound"`` or ``"depth-first"``.
        branching: ``"most-fractional"``, ``"first-fractional"`` or
            ``"pseudocost"``. Most-fractional breaks ties by lowest index.
            Pseudo-cost scores candidates by the product of estimated
            bound degradations, strong-branching up to
            ``strong_candidates`` binaries with fewer than ``reliability``
            observations per side.
        workers: number of threads solving child relaxations. Results are
            only reproducible with one worker.
        dive: run a rounding dive from the root to find an early incumbent,
            repeated every 100 expansions while none is known.
        record_tree: keep ``(node, parent, depth, relaxation value)`` rows.
    """

    rel_gap: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    node_selection: str = "best-bound"
    branching: str = "most-fractional"
    workers: int = 1
    dive: bool = True
    record_tree: bool = True
    reliability: int = 1
    strong_candidates: int = 8

    def __post_init__(self):
        if not (self.rel_gap > 0 and self.int_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.node_selection not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")
        if self.branching not in ("most-fractional", "first-fractional", "pseudocost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | limit
    objective: float
    bound: float
    x: np.ndarray | None
    nodes: int
    wall_time: float
    root_bound: float = math.nan
    tree: list = field(default_factory=list)
    message: str = ""

    @property
    def gap(self) -> float:
        if self.x is None:
            return math.inf
        return (self.bound - self.objective) / max(1.0, abs(self.bound))


class Propagator:
    """Bound propagation on rows that contain only binary variables.

    For the scheduling models these are the state exclusivity, startup and
    segment selection rows, so fixing ``z_on = 0`` immediately forces
    ``z_off + z_sb = 1`` and every segment binary of that step to 0.
    """

    def __init__(self, comp: CompiledProblem, tol: float = 1e-9):
        A = comp.A.tocsr()
        binary = comp.binary
        rows = []
        for i in range(A.shape[0]):
            cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
            if cols.size and np.all(binary[cols]):
                rows.append(i)
        rows = np.array(rows, dtype=np.int64)
        sub = A[rows].tocoo() if rows.size else None
        self.rows = rows
        self.r = sub.row if sub is not None else np.zeros(0, dtype=np.int64)
        self.j = sub.col if sub is not None else np.zeros(0, dtype=np.int64)
        self.a = sub.data if sub is not None else np.zeros(0)
        self.lo = comp.row_lo[rows] if rows.size else np.zeros(0)
        self.hi = comp.row_hi[rows] if rows.size else np.zeros(0)
        self.tol = tol

    def __call__(self, lb, ub):
        """Tighten binary bounds in place; returns False on infeasibility."""
        if self.r.size == 0:
            return bool(np.all(lb <= ub))
        r, j, a, tol = self.r, self.j, self.a, self.tol
        m = self.rows.size
        pos = a > 0
        for _ in range(100):
            cmin = np.where(pos, a * lb[j], a * ub[j])
            cmax = np.where(pos, a * ub[j], a * lb[j])
            amin = np.bincount(r, cmin, m)
            amax = np.bincount(r, cmax, m)
            if np.any(amin > self.hi + tol) or np.any(amax < self.lo - tol):
                return False
            rest_min = amin[r] - cmin
            rest_max = amax[r] - cmax
            with np.errstate(invalid="ignore"):
                lim_hi = (self.hi[r] - rest_min) / a
                lim_lo = (self.lo[r] - rest_max) / a
            new_ub = np.where(pos, lim_hi, lim_lo)
            new_lb = np.where(pos, lim_lo, lim_hi)
            new_ub = np.floor(np.nan_to_num(new_ub, nan=np.inf, neginf=-np.inf) + tol)
            new_lb = np.ceil(np.nan_to_num(new_lb, nan=-np.inf, posinf=np.inf) - tol)
            ub_before, lb_before = ub[j].copy(), lb[j].copy()
            np.minimum.at(ub, j, new_ub)
            np.maximum.at(lb, j, new_lb)
            if np.any(lb > ub):
                return False
            if np.array_equal(ub[j], ub_before) and np.array_equal(lb[j], lb_before):
                return True
        return True


class _Node:
    __slots__ = ("id", "parent", "depth", "lbB", "ubB", "bound", "x")

    def __init__(self, id, parent, depth, lbB, ubB, bound, x):
        self.id, self.parent, self.depth = id, parent, depth
        self.lbB, self.ubB, self.bound, self.x = lbB, ubB, bound, x


class _Search:
    def __init__(self, ir: ProblemIR, cfg: BnBConfig, backend):
        self.cfg = cfg
        self.comp = comp = ir.compiled()
        self.backend = get_backend(backend)
        if not self.backend.supports(comp):
            raise CapabilityError(f"backend {self.backend.name!r} cannot handle conic constraints")
        self.bin = np.flatnonzero(comp.binary)
        self.prop = Propagator(comp)
        self.sessions = [self.backend.open(comp) for _ in range(cfg.workers)]
        self.pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        self.inc_obj = -math.inf
        self.inc_x = None
        self.tree = []
        self.next_id = 0
        self.nodes = 0
        self.lock = threading.Lock()
        self.pc_sum = np.zeros((2, self.bin.size))
        self.pc_cnt = np.zeros((2, self.bin.size), dtype=np.int64)

    # bounds -------------------------------------------------------------
    def full_bounds(self, lbB, ubB):
        lb, ub = self.comp.lb.copy(), self.comp.ub.copy()
        lb[self.bin], ub[self.bin] = lbB, ubB
        return lb, ub

    def propagate(self, lbB, ubB):
        lb, ub = self.full_bounds(lbB, ubB)
        if not self.prop(lb, ub):
            return None
        return lb[self.bin], ub[self.bin]

    def relax(self, session, lbB, ubB, context) -> RelaxResult:
        lb, ub = self.full_bounds(lbB, ubB)
        res = session.solve(lb, ub)
        if res.status == "error":
            raise BackendError(f"{context}: {res.message}")
        return res

    # incumbent ------------------------------------------------------------
    def fractional(self, x):
        v = x[self.bin]
        return np.abs(v - np.round(v))

    def try_incumbent(self, session, x, lbB, ubB, context):
        v = np.round(x[self.bin])
        if np.any(v < lbB) or np.any(v > ubB):
            return
        if not (np.array_equal(lbB, ubB) and np.array_equal(lbB, v)):
            res = self.relax(session, v, v, context + " (incumbent check)")
            if res.status != "optimal":
                return
            x = res.x
        x = x.copy()
        x[self.bin] = v
        obj = float(self.comp.c @ x) + self.comp.c0
        with self.lock:
            if obj > self.inc_obj:
                self.inc_obj, self.inc_x = obj, x

    def gap_tol(self, bound):
        return self.cfg.rel_gap * max(1.0, abs(bound))

    # tree -----------------------------------------------------------------
    def make_child(self, parent: _Node | None, lbB, ubB, session):
        """Propagate, solve and classify one node; returns (open node or None, relaxation value)."""
        with self.lock:
            nid = self.next_id
            self.next_id += 1
            self.nodes += 1
        prop = self.propagate(lbB, ubB)
        depth = 0 if parent is None else parent.depth + 1
        pid = None if parent is None else parent.id
        if prop is None:
            if self.cfg.record_tree:
                self.tree.append((nid, pid, depth, -math.inf))
            return None, -math.inf
        lbB, ubB = prop
        res = self.relax(session, lbB, ubB, f"node {nid} (depth {depth})")
        obj = res.objective if res.status == "optimal" else -math.inf
        if self.cfg.record_tree:
            self.tree.append((nid, pid, depth, obj))
        if res.status != "optimal":
            return None, obj
        bound = res.objective if parent is None else min(res.objective, parent.bound)
        node = _Node(nid, pid, depth, lbB, ubB, bound, res.x)
        if np.all(self.fractional(res.x) <= self.cfg.int_tol):
            self.try_incumbent(session, res.x, lbB, ubB, f"node {nid}")
            return None, obj
        return node, obj

    def _pair(self, node: _Node, k: int, session):
        out = []
        for val in (0.0, 1.0):
            lbB, ubB = node.lbB.copy(), node.ubB.copy()
            lbB[k] = ubB[k] = val
            out.append(self.make_child(node, lbB, ubB, session))
        return out

    def _record_gain(self, node: _Node, k: int, objs):
        f = node.x[self.bin[k]]
        f = f - math.floor(f)
        with self.lock:
            for side, (obj, width) in enumerate(zip(objs, (f, 1.0 - f))):
                if math.isfinite(obj) and width > 0:
                    self.pc_sum[side, k] += max(node.bound - obj, 0.0) / width
                    self.pc_cnt[side, k] += 1

    def expand(self, node: _Node, session):
        """Branch on one binary of ``node``; returns the open children."""
        frac = self.fractional(node.x)
        cand = np.flatnonzero((node.lbB < node.ubB) & (frac > self.cfg.int_tol))
        rule = self.cfg.branching
        if rule == "first-fractional":
            k = int(cand[0])
        elif rule == "most-fractional":
            k = int(cand[np.argmax(frac[cand])])
        else:
            k, done = self._pseudocost_choice(node, cand, frac, session)
            if done is not None:
                return [kid for kid, _ in done if kid is not None]
        pair = self._pair(node, k, session)
        if rule == "pseudocost":
            self._record_gain(node, k, [o for _, o in pair])
        return [kid for kid, _ in pair if kid is not None]

    def _pseudocost_choice(self, node, cand, frac, session):
        """Product-score pseudo-cost rule; unreliable candidates are strong-branched first."""
        x = node.x[self.bin]
        f = x - np.floor(x)
        reliable = np.min(self.pc_cnt[:, cand], axis=0) >= self.cfg.reliability
        trial = cand[~reliable]
        trial = trial[np.argsort(-frac[trial], kind="stable")][: self.cfg.strong_candidates]
        cached = {}
        for k in trial:
            pair = self._pair(node, int(k), session)
            objs = [o for _, o in pair]
            self._record_gain(node, int(k), objs)
            cached[int(k)] = pair
            if not all(math.isfinite(o) for o in objs):
                return int(k), pair
        with self.lock:
            cnt = np.maximum(self.pc_cnt, 1)
            mean = np.array([
                self.pc_sum[s].sum() / self.pc_cnt[s].sum() if self.pc_cnt[s].sum() else 1.0 for s in (0, 1)
            ])
            est = np.where(self.pc_cnt > 0, self.pc_sum / cnt, mean[:, None])
        score = np.maximum(est[0, cand] * f[cand], 1e-6) * np.maximum(est[1, cand] * (1 - f[cand]), 1e-6)
        k = int(cand[np.argmax(score)])
        return k, cached.get(k)

    def dive(self, root: _Node, session, max_steps=None, deadline=None):
        """Rounding dive: fix a share of the least fractional binaries per LP.

        The share shrinks after an infeasible step and grows after a
        feasible one; a single binary is tried in both directions before
        the dive gives up. The default step budget grows with the number
        of free binaries.
        """
        lbB, ubB, x = root.lbB.copy(), root.ubB.copy(), root.x
        if max_steps is None:
            max_steps = 100 + int(np.sum(lbB < ubB))
        share = 0.25
        for _ in range(max_steps):
            frac = self.fractional(x)
            if np.all(frac <= self.cfg.int_tol):
                self.try_incumbent(session, x, lbB, ubB, "dive")
                return
            if deadline is not None and time.perf_counter() > deadline:
                return
            v = x[self.bin]
            near = (frac <= self.cfg.int_tol) & (lbB < ubB)
            lbB[near] = ubB[near] = np.round(v[near])
            free = np.flatnonzero(lbB < ubB)
            free = free[np.argsort(frac[free], kind="stable")]
            n_fix = max(1, int(share * free.size))
            tries = [np.round(v[free[:n_fix]])]
            if n_fix == 1:
                tries.append(1.0 - tries[0])
            moved = False
            for vals in tries:
                l2, u2 = lbB.copy(), ubB.copy()
                l2[free[:n_fix]] = u2[free[:n_fix]] = vals
                prop = self.propagate(l2, u2)
                if prop is None:
                    continue
                res = self.relax(session, *prop, "dive")
                if res.status == "optimal" and res.objective > self.inc_obj + self.gap_tol(res.objective):
                    lbB, ubB = prop
                    x = res.x
                    moved = True
                    break
            if not moved:
                if n_fix == 1:
                    return
                share /= 4
            else:
                share = min(0.25, share * 2)

    def run(self) -> SolveResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        deadline = None if cfg.time_limit is None else t0 + cfg.time_limit
        session = self.sessions[0]
        lbB0, ubB0 = self.comp.lb[self.bin].copy(), self.comp.ub[self.bin].copy()
        root, _ = self.make_child(None, lbB0, ubB0, session)
        root_bound = root.bound if root is not None else (self.inc_obj if self.inc_x is not None else -math.inf)
        if root is not None and cfg.dive:
            self.dive(root, session, deadline=deadline)

        heap = []
        counter = 0

        def push(node):
            nonlocal counter
            if node.bound <= self.inc_obj + self.gap_tol(node.bound):
                return
            key = -node.bound if cfg.node_selection == "best-bound" else -node.depth
            heapq.heappush(heap, (key, counter if cfg.node_selection == "best-bound" else -counter, node))
            counter += 1

        if root is not None:
            push(root)
        status = None
        expansions = 0
        while heap:
            best = max(n.bound for _, _, n in heap) if cfg.node_selection == "depth-first" else heap[0][2].bound
            if self.inc_x is not None and best - self.inc_obj <= self.gap_tol(best):
                break
            if cfg.node_limit is not None and self.nodes >= cfg.node_limit:
                status = "limit"
                break
            if deadline is not None and time.perf_counter() > deadline:
                status = "limit"
                break
            batch = []
            while heap and len(batch) < cfg.workers:
                _, _, node = heapq.heappop(heap)
                if node.bound > self.inc_obj + self.gap_tol(node.bound):
                    batch.append(node)
            expansions += 1
            if cfg.dive and self.inc_x is None and batch and expansions % 100 == 0:
                self.dive(batch[0], session, deadline=deadline)
            if self.pool is None:
                kids = [kid for node in batch for kid in self.expand(node, session)]
            else:
                futs = [self.pool.submit(self.expand, node, self.sessions[i]) for i, node in enumerate(batch)]
                kids = [kid for fut in futs for kid in fut.result()]
            for kid in kids:
                push(kid)
        if self.pool is not None:
            self.pool.shutdown()

        open_bound = max((n.bound for _, _, n in heap), default=-math.inf)
        bound = max(open_bound, self.inc_obj)
        wall = time.perf_counter() - t0
        if status is None:
            status = "optimal" if self.inc_x is not None else "infeasible"
        return SolveResult(
            status,
            self.inc_obj if self.inc_x is not None else math.nan,
            bound if self.inc_x is not None or heap else -math.inf,
            self.inc_x,
            self.nodes,
            wall,
            root_bound,
            self.tree,
        )


def solve_bnb(ir: ProblemIR, cfg: BnBConfig | None = None, backend="auto") -> SolveResult:
    """Maximize ``ir`` by branch-and-bound over its binaries.

    Binaries are relaxed to [0, 1]; each node solves the continuous
    relaxation with ``backend``. Children of a branched node get the
    fractional binary fixed to 0 and to 1, followed by propagation on the
    binary-only rows.
    """
    return _Search(ir, cfg or BnBConfig(), backend).run()
