"""Day-ahead scheduling problem of a wind farm + electrolyzer plant.

:func:`build_base` creates the plant and operating-state part of the
problem. Exactly one hydrogen production curve formulation is then attached:

=================  ==========================================================
``attach_hyp_mil``  piece-wise linear curve with one binary per segment
``attach_hyp_l``    linear relaxation of the piece-wise curve (no binaries)
``attach_hyp_soc``  concave-quadratic relaxation of a quadratic curve
``attach_hyp_misoc`` one quadratic per segment, with segment binaries
=================  ==========================================================

Every builder returns a new :class:`~h2sched.ir.ProblemIR`; inputs are never
modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curve import QuadraticCurve, QuadraticPiece, SegmentSet, TabulatedCurve, evaluate
from .ir import ProblemIR


class ModelError(ValueError):
    pass


CURVE_MODELS = ("mil", "l", "soc", "misoc")


@dataclass(frozen=True)
class PlantConfig:
    """Electrolyzer and market parameters.

    Defaults describe a 1 MW electrolyzer with 0.15 MW minimum load, 0.01 MW
    standby consumption, a 50 EUR cold-start cost and hydrogen sold at
    2.1 EUR/kg.
    """

    p_max: float = 1.0
    p_min: float = 0.15
    p_sb: float = 0.01
    k_su: float = 50.0
    chi: float = 2.1

    def __post_init__(self):
        if not 0 < self.p_sb < self.p_min < self.p_max:
            raise ModelError("need 0 < p_sb < p_min < p_max")
        if not self.chi > 0:
            raise ModelError("hydrogen price must be positive")
        if self.k_su < 0:
            raise ModelError("startup cost must be nonnegative")

    def as_dict(self) -> dict:
        return {"p_max": self.p_max, "p_min": self.p_min, "p_sb": self.p_sb, "k_su": self.k_su, "chi": self.chi}


@dataclass(frozen=True)
class MarketSeries:
    """Day-ahead prices [EUR/MWh] and wind forecast [MW] per time step."""

    lam: np.ndarray
    wind: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).copy()
        wind = np.asarray(self.wind, dtype=float).copy()
        if lam.ndim != 1 or lam.shape != wind.shape:
            raise ModelError("price and wind series must be 1-d and of equal length")
        if lam.size == 0:
            raise ModelError("empty horizon")
        if np.any(wind < 0) or not np.all(np.isfinite(wind)) or not np.all(np.isfinite(lam)):
            raise ModelError("wind must be finite and nonnegative, prices finite")
        lam.setflags(write=False)
        wind.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "wind", wind)

    @property
    def T(self) -> int:
        return int(self.lam.size)

    def window(self, start: int, stop: int) -> "MarketSeries":
        return MarketSeries(self.lam[start:stop], self.wind[start:stop])


@dataclass(frozen=True)
class DemandSpec:
    """Partition of the horizon into sub-periods with a hydrogen cap each.

    ``periods`` holds 0-based time-step indices.
    """

    periods: tuple[tuple[int, ...], ...]
    d_max: tuple[float, ...]

    def __post_init__(self):
        periods = tuple(tuple(int(t) for t in per) for per in self.periods)
        d_max = tuple(float(d) for d in np.atleast_1d(self.d_max))
        if len(periods) != len(d_max):
            raise ModelError("one demand cap per sub-period required")
        if any(d < 0 for d in d_max):
            raise ModelError("demand caps must be nonnegative")
        if any(len(per) == 0 for per in periods):
            raise ModelError("empty sub-period")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "d_max", d_max)

    def check_horizon(self, T: int) -> None:
        flat = sorted(t for per in self.periods for t in per)
        if flat != list(range(T)):
            raise ModelError("sub-periods must be disjoint and cover the horizon exactly")

    @classmethod
    def default(cls, T: int, d_max: float | Sequence[float]) -> "DemandSpec":
        """Calendar days when ``T`` is a multiple of 24, otherwise one period."""
        if T % 24 == 0:
            periods = tuple(tuple(range(d * 24, (d + 1) * 24)) for d in range(T // 24))
        else:
            periods = (tuple(range(T)),)
        caps = np.broadcast_to(np.asarray(d_max, dtype=float), (len(periods),))
        return cls(periods, tuple(caps))

    def period_of(self, T: int) -> np.ndarray:
        out = np.empty(T, dtype=np.int64)
        for n, per in enumerate(self.periods):
            out[list(per)] = n
        return out


def full_load_demand(curve: TabulatedCurve, share: float = 0.6, hours: int = 24) -> float:
    """Hydrogen produced running at full load ``share`` of ``hours``."""
    return share * hours * evaluate(curve, curve.p_max)


@dataclass
class ScheduleSolution:
    """Optimal values of a solved (deterministic or two-stage) schedule.

    ``values`` maps every handle symbol of the IR to an array of the same
    shape holding the solution.
    """

    objective: float
    status: str
    values: dict[str, np.ndarray]
    ir: ProblemIR | None = None
    x: np.ndarray | None = None
    bound: float = math.nan
    nodes: int = 0
    wall_time: float = 0.0

    @classmethod
    def from_result(cls, ir: ProblemIR, result) -> "ScheduleSolution":
        vals = {}
        if result.x is not None:
            for key, idx in ir.handles.items():
                vals[key] = np.asarray(result.x)[idx]
        return cls(result.objective, result.status, vals, ir, result.x, result.bound, result.nodes, result.wall_time)

    def __getattr__(self, name):
        vals = self.__dict__.get("values", {})
        if name in vals:
            return vals[name]
        raise AttributeError(name)

    @property
    def state(self) -> np.ndarray:
        """Per-step state label: 'on', 'sb' or 'off' (first stage)."""
        z = np.stack([self.values["z_on"], self.values["z_sb"], self.values["z_off"]])
        return np.array(["on", "sb", "off"])[np.argmax(z, axis=0)]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _label(pos) -> str:
    return ",".join(str(i + 1) for i in pos)


def add_state_block(ir: ProblemIR, plant: PlantConfig, p, tag: str, group: str, initial_off: bool = False) -> dict:
    """Operating-state variables and constraints for power array ``p`` (time on axis 0)."""
    shape = p.shape
    z_on = ir.add_vars(f"z_on{tag}", shape, binary=True, group=group)
    z_off = ir.add_vars(f"z_off{tag}", shape, binary=True, group=group)
    z_sb = ir.add_vars(f"z_sb{tag}", shape, binary=True, group=group)
    z_su = ir.add_vars(f"z_su{tag}", shape, binary=True, group=group)
    for pos in np.ndindex(*shape):
        lab = _label(pos)
        ir.add_linear(f"states{tag}[{lab}]", {z_on[pos]: 1, z_off[pos]: 1, z_sb[pos]: 1}, "==", 1, group)
        ir.add_linear(f"p_max{tag}[{lab}]", {p[pos]: 1, z_on[pos]: -plant.p_max, z_sb[pos]: -plant.p_sb}, "<=", 0, group)
        ir.add_linear(f"p_min{tag}[{lab}]", {p[pos]: 1, z_on[pos]: -plant.p_min, z_sb[pos]: -plant.p_sb}, ">=", 0, group)
        t = pos[0]
        if t > 0:
            prev = (t - 1,) + pos[1:]
            ir.add_linear(
                f"startup{tag}[{lab}]",
                {z_su[pos]: 1, z_off[prev]: -1, z_on[pos]: -1, z_sb[pos]: -1}, ">=", -1, group,
            )
        elif initial_off:
            ir.add_linear(f"startup{tag}[{lab}]", {z_su[pos]: 1, z_on[pos]: -1, z_sb[pos]: -1}, ">=", 0, group)
        else:
            ir.set_bounds(int(z_su[pos]), ub=0.0)
    return {"z_on": z_on, "z_off": z_off, "z_sb": z_sb, "z_su": z_su}


def build_base(
    plant: PlantConfig, series: MarketSeries, demand: DemandSpec, initial_off: bool = False
) -> ProblemIR:
    """Plant balance, demand caps and operating states, without a curve.

    The hydrogen production curve is attached afterwards with one of the
    ``attach_*`` functions.
    """
    T = series.T
    demand.check_horizon(T)
    ir = ProblemIR()
    f = ir.add_vars("f", T, group="plant")
    p = ir.add_vars("p", T, group="plant")
    h = ir.add_vars("h", T, group="plant")
    for t in range(T):
        ir.add_linear(f"balance[{t + 1}]", {f[t]: -1, p[t]: -1}, "==", -float(series.wind[t]), "plant")
    for n, per in enumerate(demand.periods):
        ir.add_linear(f"demand[{n + 1}]", {h[t]: 1 for t in per}, "<=", demand.d_max[n], "plant")
    z = add_state_block(ir, plant, p, "", "states", initial_off)
    obj = {}
    for t in range(T):
        obj[f[t]] = float(series.lam[t])
        obj[h[t]] = plant.chi
        obj[z["z_su"][t]] = -plant.k_su
    ir.add_objective(obj)
    ir.meta.update(
        stage="deterministic",
        T=T,
        plant=plant.as_dict(),
        lam=series.lam.tolist(),
        wind=series.wind.tolist(),
        periods=[list(per) for per in demand.periods],
        d_max=list(demand.d_max),
        initial_off=initial_off,
        curve_model=None,
    )
    return ir


def _plant_of(ir: ProblemIR) -> PlantConfig:
    return PlantConfig(**ir.meta["plant"])


def _check_fresh(ir: ProblemIR):
    if "plant" not in ir.meta:
        raise ModelError("IR was not created by build_base")
    if ir.meta.get("curve_model") is not None:
        raise ModelError(f"a {ir.meta['curve_model']} curve is already attached")


def _check_tiling(p_lo, p_hi, plant: PlantConfig, what: str):
    tol = 1e-9
    if abs(p_lo[0] - plant.p_min) > tol or abs(p_hi[-1] - plant.p_max) > tol:
        raise ModelError(f"{what} must cover [p_min, p_max] = [{plant.p_min}, {plant.p_max}]")
    for k in range(len(p_lo) - 1):
        if p_hi[k] > p_lo[k + 1] + tol:
            raise ModelError(f"{what} overlap")
        if p_hi[k] < p_lo[k + 1] - tol:
            raise ModelError(f"{what} leave a gap")


def curve_block(ir: ProblemIR, kind: str, data, plant: PlantConfig, p, h, z_on, z_sb, tag: str, group: str) -> dict:
    """Add one curve formulation for arrays of power/hydrogen/state indices.

    Shared by the deterministic and the two-stage builders; ``tag`` suffixes
    symbol and constraint names.
    """
    shape = p.shape
    out = {}
    if kind in ("mil", "misoc"):
        pieces = list(data)
        S = len(pieces)
        p_seg = ir.add_vars(f"p_seg{tag}", (S,) + shape, group=group)
        z_seg = ir.add_vars(f"z_seg{tag}", (S,) + shape, binary=True, group=group)
        out.update(p_seg=p_seg, z_seg=z_seg)
        for pos in np.ndindex(*shape):
            lab = _label(pos)
            if kind == "mil":
                coeffs = {h[pos]: 1.0}
                for s, seg in enumerate(pieces):
                    coeffs[p_seg[(s,) + pos]] = -seg.slope
                    coeffs[z_seg[(s,) + pos]] = -seg.intercept
                ir.add_linear(f"hyp{tag}[{lab}]", coeffs, "==", 0, group)
            else:
                squares, coeffs = {}, {h[pos]: -1.0}
                for s, piece in enumerate(pieces):
                    squares[p_seg[(s,) + pos]] = piece.curve.a
                    coeffs[p_seg[(s,) + pos]] = piece.curve.b
                    coeffs[z_seg[(s,) + pos]] = piece.curve.c
                ir.add_quadratic(f"hyp{tag}[{lab}]", squares, coeffs, 0.0, group)
            for s, seg in enumerate(pieces):
                ps, zs = p_seg[(s,) + pos], z_seg[(s,) + pos]
                ir.add_linear(f"seg_lo{tag}[{s + 1},{lab}]", {ps: 1, zs: -seg.p_lo}, ">=", 0, group)
                ir.add_linear(f"seg_hi{tag}[{s + 1},{lab}]", {ps: 1, zs: -seg.p_hi}, "<=", 0, group)
            pick = {z_on[pos]: 1.0}
            total = {p[pos]: 1.0, z_sb[pos]: -plant.p_sb}
            for s in range(S):
                pick[z_seg[(s,) + pos]] = -1.0
                total[p_seg[(s,) + pos]] = -1.0
            ir.add_linear(f"seg_pick{tag}[{lab}]", pick, "==", 0, group)
            ir.add_linear(f"p_total{tag}[{lab}]", total, "==", 0, group)
    elif kind in ("l", "soc"):
        pt = ir.add_vars(f"p_tilde{tag}", shape, group=group)
        out.update(p_tilde=pt)
        for pos in np.ndindex(*shape):
            lab = _label(pos)
            if kind == "l":
                for s, seg in enumerate(data):
                    ir.add_linear(
                        f"hyp{tag}[{s + 1},{lab}]",
                        {h[pos]: 1, pt[pos]: -seg.slope, z_on[pos]: -seg.intercept}, "<=", 0, group,
                    )
            else:
                ir.add_quadratic(
                    f"hyp{tag}[{lab}]", {pt[pos]: data.a}, {pt[pos]: data.b, z_on[pos]: data.c, h[pos]: -1.0}, 0.0, group
                )
            ir.add_linear(f"pt_lo{tag}[{lab}]", {pt[pos]: 1, z_on[pos]: -plant.p_min}, ">=", 0, group)
            ir.add_linear(f"pt_hi{tag}[{lab}]", {pt[pos]: 1, z_on[pos]: -plant.p_max}, "<=", 0, group)
            ir.add_linear(f"p_total{tag}[{lab}]", {p[pos]: 1, pt[pos]: -1, z_sb[pos]: -plant.p_sb}, "==", 0, group)
    else:
        raise ModelError(f"unknown curve model {kind!r}")
    return out


def curve_meta(kind: str, data) -> dict:
    if kind in ("mil", "l"):
        return {"segments": [[s.slope, s.intercept, s.p_lo, s.p_hi] for s in data]}
    if kind == "soc":
        return {"quadratic": [data.a, data.b, data.c]}
    return {"pieces": [[pc.curve.a, pc.curve.b, pc.curve.c, pc.p_lo, pc.p_hi] for pc in data]}


def validate_curve_data(kind: str, data, plant: PlantConfig):
    """Check curve data against the plant's operating range; returns normalized data."""
    if kind in ("mil", "l"):
        if not isinstance(data, SegmentSet):
            raise ModelError("segment set required")
        _check_tiling([s.p_lo for s in data], [s.p_hi for s in data], plant, "segments")
        return data
    if kind == "soc":
        if not isinstance(data, QuadraticCurve):
            raise ModelError("quadratic curve required")
        if not data.a < 0:
            raise ModelError("quadratic coefficient a must be negative for a convex relaxation")
        return data
    if kind == "misoc":
        pieces = [pc if isinstance(pc, QuadraticPiece) else QuadraticPiece(*pc) for pc in data]
        if not pieces:
            raise ModelError("at least one quadratic piece required")
        if any(not pc.curve.a < 0 for pc in pieces):
            raise ModelError("every piece needs a negative quadratic coefficient")
        if any(not pc.p_lo < pc.p_hi for pc in pieces):
            raise ModelError("piece bounds must satisfy p_lo < p_hi")
        _check_tiling([pc.p_lo for pc in pieces], [pc.p_hi for pc in pieces], plant, "pieces")
        return pieces
    raise ModelError(f"unknown curve model {kind!r}")


def attach_curve(ir: ProblemIR, kind: str, data) -> ProblemIR:
    _check_fresh(ir)
    plant = _plant_of(ir)
    data = validate_curve_data(kind, data, plant)
    new = ir.copy()
    H = new.handles
    out = curve_block(new, kind, data, plant, H["p"], H["h"], H["z_on"], H["z_sb"], "", "curve")
    new.meta["curve_model"] = kind
    new.meta["curve"] = curve_meta(kind, data)
    return new


def attach_hyp_mil(ir: ProblemIR, segs: SegmentSet) -> ProblemIR:
    """Piece-wise linear production curve.

    Adds per segment and step a binary selecting the segment and the power
    consumed on it; hydrogen equals the selected chord.
    """
    return attach_curve(ir, "mil", segs)


def attach_hyp_l(ir: ProblemIR, segs: SegmentSet) -> ProblemIR:
    """Hydrogen below every segment line; no segment binaries."""
    return attach_curve(ir, "l", segs)


def attach_hyp_soc(ir: ProblemIR, q: QuadraticCurve) -> ProblemIR:
    """h <= a p~^2 + b p~ + c z_on with a < 0."""
    return attach_curve(ir, "soc", q)


def attach_hyp_misoc(ir: ProblemIR, pieces: Sequence[QuadraticPiece]) -> ProblemIR:
    """One concave quadratic per power sub-range, selected by segment binaries."""
    return attach_curve(ir, "misoc", pieces)


def soc_reformulate(ir: ProblemIR) -> ProblemIR:
    """Replace each concave-quadratic constraint by rotated cones.

    ``sum_k a_k x_k^2 + c.x >= rhs`` becomes ``c.x - sum_k r_k = rhs`` plus
    ``(r_k, 1/2, sqrt(-a_k) x_k)`` in the rotated cone for each square.
    For the single-square curve constraint this is
    ``h + r - b p~ - c z_on = 0`` with ``-a p~^2 <= r``.
    """
    new = ir.copy()
    quads, new.quadratic = new.quadratic, []
    rs = []
    for q in quads:
        coeffs = {j: -c for j, c in q.coeffs}
        for k, (j, a) in enumerate(q.squares):
            r = new.add_var(f"r{k + 1}.{q.name}", 0.0, math.inf, False, q.group)
            rs.append(r)
            coeffs[r] = coeffs.get(r, 0.0) + 1.0
            new.add_cone(f"cone{k + 1}.{q.name}", r, j, math.sqrt(-a), q.group)
        new.add_linear(f"{q.name}.lin", coeffs, "==", -q.rhs, q.group)
    if rs:
        new.handles["r"] = np.array(rs, dtype=np.int64)
    new.meta["conic_form"] = "rotated"
    return new


def solve(ir: ProblemIR, cfg=None, backend="auto") -> ScheduleSolution:
    """Solve ``ir`` by branch-and-bound and wrap the result."""
    from .solver import solve_bnb

    return ScheduleSolution.from_result(ir, solve_bnb(ir, cfg, backend))


def build(
    plant: PlantConfig, series: MarketSeries, demand: DemandSpec, kind: str, data, initial_off: bool = False
) -> ProblemIR:
    """build_base followed by the matching attach function."""
    return attach_curve(build_base(plant, series, demand, initial_off), kind, data)


def solve_daily(
    plant: PlantConfig,
    series: MarketSeries,
    demand: DemandSpec,
    kind: str,
    data,
    cfg=None,
    backend="auto",
    initial_off: bool = False,
) -> list[ScheduleSolution]:
    """Solve each demand sub-period as an independent problem.

    Every sub-period must be a contiguous block of hours. The state at the
    start of each block is not coupled to the previous block.
    """
    demand.check_horizon(series.T)
    out = []
    for n, per in enumerate(demand.periods):
        lo, hi = per[0], per[-1] + 1
        if list(per) != list(range(lo, hi)):
            raise ModelError(f"sub-period {n + 1} is not a contiguous block of hours")
        sub = DemandSpec([list(range(hi - lo))], [demand.d_max[n]])
        sol = solve(build(plant, series.window(lo, hi), sub, kind, data, initial_off), cfg, backend)
        if sol.status != "optimal":
            raise ModelError(f"sub-period {n + 1}: solver returned {sol.status}")
        out.append(sol)
    return out
