"""Exactness checks, ex-post evaluation, dispatch comparison and timing.

The gap of a relaxed curve constraint is the distance between the curve
evaluated at the optimal power and the hydrogen the model reports. The
checkers here compute it per time step and compare it against what the
exactness conditions predict:

* a demand cap that does not bind leaves no reason to under-report
  hydrogen, so the relaxation is exact;
* a binding cap with strictly positive prices is exact as well, because
  lowering power in a slack hour would raise profit;
* a cap met by non-positive-price hours alone can force a gap, since
  burning extra power at negative prices pays even without hydrogen.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curve import QuadraticCurve, SegmentSet, TabulatedCurve, evaluate
from .model import DemandSpec, MarketSeries, PlantConfig, ScheduleSolution

BIND_TOL = 1e-6
GAP_TOL = 1e-6
POWER_EPS = 1e-6

LABELS = ("exact_by_thm1", "exact_by_thm2", "thm3_condition_met", "inexact_observed", "exact_observed")
RELAXED_MODELS = ("l", "soc")


class AnalysisError(ValueError):
    pass


class ExPostDomainError(AnalysisError):
    """Power outside the tabulated curve's domain."""


# ---------------------------------------------------------------------------
# solution access
# ---------------------------------------------------------------------------

def _parts(sol) -> list[ScheduleSolution]:
    """Daily solution lists and two-stage solutions as ScheduleSolution parts."""
    if isinstance(sol, (list, tuple)):
        out = []
        for s in sol:
            out.extend(_parts(s))
        if not out:
            raise AnalysisError("empty solution list")
        return out
    if hasattr(sol, "first_stage"):
        return [sol.first_stage]
    return [sol]


def _require_values(part: ScheduleSolution):
    if part.x is None or not part.values:
        raise AnalysisError(f"solution has no point (status {part.status})")
    if part.ir is None:
        raise AnalysisError("solution does not carry its IR")


def _stacked(sol, keys) -> dict:
    parts = _parts(sol)
    for part in parts:
        _require_values(part)
    out = {k: np.concatenate([np.asarray(p.values[k], dtype=float) for p in parts]) for k in keys}
    out["lam"] = np.concatenate([np.asarray(p.ir.meta["lam"], dtype=float) for p in parts])
    out["wind"] = np.concatenate([np.asarray(p.ir.meta["wind"], dtype=float) for p in parts])
    return out


def _curve_data(kind: str, meta: dict):
    if kind in ("mil", "l"):
        return np.asarray(meta["segments"], dtype=float)
    if kind == "soc":
        return np.asarray(meta["quadratic"], dtype=float)
    return np.asarray(meta["pieces"], dtype=float)


def _data_from_object(kind: str, data):
    if isinstance(data, SegmentSet):
        return np.array([[s.slope, s.intercept, s.p_lo, s.p_hi] for s in data])
    if isinstance(data, QuadraticCurve):
        return np.array([data.a, data.b, data.c])
    if kind == "misoc":
        return np.array([[pc.curve.a, pc.curve.b, pc.curve.c, pc.p_lo, pc.p_hi] for pc in data])
    return np.asarray(data, dtype=float)


def _gap_array(kind: str, data: np.ndarray, V: dict, tag: str) -> np.ndarray:
    z_on = V["z_on" + tag]
    h = V["h" + tag]
    if kind == "mil":
        return np.zeros_like(h)
    if kind == "soc":
        pt = V["p_tilde" + tag]
        a, b, c = data
        g = a * pt * pt + b * pt + c * z_on - h
    elif kind == "l":
        pt = V["p_tilde" + tag]
        lines = data[:, 0].reshape((-1,) + (1,) * pt.ndim) * pt + data[:, 1].reshape((-1,) + (1,) * pt.ndim) * z_on
        g = lines.min(axis=0) - h
    else:
        ps, zs = V["p_seg" + tag], V["z_seg" + tag]
        shp = (-1,) + (1,) * h.ndim
        a, b, c = (data[:, k].reshape(shp) for k in range(3))
        g = (a * ps * ps + b * ps + c * zs).sum(axis=0) - h
    return np.where(z_on > 0.5, g, 0.0)


# ---------------------------------------------------------------------------
# exactness
# ---------------------------------------------------------------------------

@dataclass
class ExactnessReport:
    """Per-step relaxation gaps [kg/h] and per-sub-period classification.

    ``gaps`` covers the day-ahead schedule; ``gaps_rt`` (shape (T, n)) the
    real-time stage of a two-stage solution. ``classification`` names the
    condition that applies to each sub-period, ``observed`` what the gaps
    show, and ``contradictions`` lists sub-periods where the two disagree.
    """

    curve_model: str
    gaps: np.ndarray
    period_gaps: np.ndarray
    periods: tuple
    negative_hours: tuple
    gaps_rt: np.ndarray | None = None
    period_gaps_rt: np.ndarray | None = None
    binding: tuple | None = None
    classification: tuple | None = None
    observed: tuple | None = None
    contradictions: tuple = ()

    @property
    def max_gap(self) -> float:
        m = float(self.gaps.max(initial=0.0))
        if self.gaps_rt is not None:
            m = max(m, float(self.gaps_rt.max(initial=0.0)))
        return m

    @property
    def total_gap(self) -> float:
        return float(self.gaps.sum())

    def is_exact(self, tol: float = GAP_TOL) -> bool:
        return self.max_gap < tol

    def to_text(self) -> str:
        lines = [
            f"curve_model: {self.curve_model}",
            f"max_gap_kg_h: {self.max_gap:.12g}",
            f"total_gap_kg: {self.total_gap:.12g}",
        ]
        for n in range(len(self.periods)):
            rec = [f"period: {n + 1}", f"gap_kg={self.period_gaps[n]:.12g}"]
            if self.binding is not None:
                rec.append(f"binding={str(self.binding[n]).lower()}")
            if self.classification is not None:
                rec.append(f"class={self.classification[n]}")
                rec.append(f"observed={self.observed[n]}")
            rec.append("negative_hours=" + " ".join(str(t) for t in self.negative_hours[n]))
            lines.append("  ".join(rec))
        lines.append(f"contradictions: {len(self.contradictions)}")
        lines.extend(f"contradiction: {c}" for c in self.contradictions)
        return "\n".join(lines) + "\n"


def _concat_reports(reports: list[ExactnessReport]) -> ExactnessReport:
    offset = 0
    periods, neg = [], []
    for r in reports:
        periods.extend(tuple(t + offset for t in per) for per in r.periods)
        neg.extend(tuple(t + offset for t in per) for per in r.negative_hours)
        offset += r.gaps.size
    first = reports[0]

    def cat(name):
        vals = [getattr(r, name) for r in reports]
        return None if any(v is None for v in vals) else tuple(x for v in vals for x in v)

    contra = []
    base = 0
    for r in reports:
        contra.extend(_shift_contradiction(c, base) for c in r.contradictions)
        base += len(r.periods)
    return ExactnessReport(
        first.curve_model,
        np.concatenate([r.gaps for r in reports]),
        np.concatenate([r.period_gaps for r in reports]),
        tuple(periods),
        tuple(neg),
        binding=cat("binding"),
        classification=cat("classification"),
        observed=cat("observed"),
        contradictions=tuple(contra),
    )


def _shift_contradiction(text: str, base: int) -> str:
    head, _, rest = text.partition(":")
    return f"period {int(head.split()[1]) + base}:{rest}"


def relaxation_gap(sol, curve_data=None, tol: float = 1e-6) -> ExactnessReport:
    """Per-step gap between the active curve relaxation and reported hydrogen.

    Args:
        sol: a ScheduleSolution, a StochasticSolution or a list of daily
            ScheduleSolutions.
        curve_data: curve model data to evaluate with; defaults to the data
            the IR was built with.
        tol: feasibility tolerance for the solution check.

    Raises:
        AnalysisError: if the solution is infeasible for its IR.
    """
    from .solver import check_feasibility

    if isinstance(sol, (list, tuple)):
        return _concat_reports([relaxation_gap(s, curve_data, tol) for s in sol])
    part = _parts(sol)[0]
    _require_values(part)
    ir = part.ir
    bad = check_feasibility(ir, part.x, tol=tol)
    if bad:
        worst = max(bad, key=lambda v: v.amount)
        raise AnalysisError(f"solution violates {len(bad)} constraints, worst {worst.name} by {worst.amount:.3g}")
    kind = ir.meta["curve_model"]
    data = _curve_data(kind, ir.meta["curve"]) if curve_data is None else _data_from_object(kind, curve_data)
    V = part.values
    gaps = _gap_array(kind, data, V, "")
    periods = tuple(tuple(per) for per in ir.meta["periods"])
    lam = np.asarray(ir.meta["lam"])
    neg = tuple(tuple(t for t in per if lam[t] <= 0) for per in periods)
    pg = np.array([gaps[list(per)].sum() for per in periods])
    rep = ExactnessReport(kind, gaps, pg, periods, neg)
    if ir.meta.get("stage") == "two_stage":
        g_rt = _gap_array(kind, data, V, "_rt")
        rep.gaps_rt = g_rt
        rep.period_gaps_rt = np.array([g_rt[list(per)].sum(axis=0) for per in periods])
    return rep


def apriori_check(series: MarketSeries, demand: DemandSpec, q, plant: PlantConfig) -> np.ndarray:
    """Per sub-period: can the non-positive-price hours alone meet the cap?

    Sums the largest hydrogen output available in each hour with
    ``lam <= 0``, at ``min(W_t, p_max)``, and compares with the cap.
    ``False`` guarantees an exact relaxation; ``True`` only allows a gap.
    Hours where the available power is below ``p_min`` contribute nothing.

    ``q`` is the QuadraticCurve of the conic model, or the SegmentSet of
    the linear relaxation (evaluated on its lower envelope).
    """
    if isinstance(q, QuadraticCurve) and not q.a < 0:
        raise AnalysisError("quadratic coefficient must be negative")
    demand.check_horizon(series.T)
    pbar = np.minimum(series.wind, plant.p_max)
    if isinstance(q, SegmentSet):
        prod = q.lower_envelope(np.clip(pbar, q.p_min, q.p_max))
    else:
        prod = q(pbar)
    prod = np.where(pbar >= plant.p_min - 1e-12, np.maximum(prod, 0.0), 0.0)
    out = []
    for per, cap in zip(demand.periods, demand.d_max):
        idx = [t for t in per if series.lam[t] <= 0]
        out.append(bool(prod[idx].sum() >= cap))
    return np.array(out, dtype=bool)


def classify_exactness(
    sol,
    series: MarketSeries | None = None,
    demand: DemandSpec | None = None,
    report: ExactnessReport | None = None,
    gap_tol: float = GAP_TOL,
    bind_tol: float = BIND_TOL,
) -> ExactnessReport:
    """Attach condition labels to a gap report and cross-check them.

    Per sub-period, in order: a non-binding cap is labelled
    ``exact_by_thm1``; a binding cap with every price positive
    ``exact_by_thm2``; a cap met within the non-positive-price hours alone
    ``thm3_condition_met``; otherwise the observed label. The observed
    label (``exact_observed`` / ``inexact_observed``) is always recorded.

    Contradictions are checked for the relaxed models (L and SOC): a gap
    where exactness is guaranteed, or no gap in the negative-price hours
    when the third condition holds and some on-state hour with a strictly
    negative price still has spare power.
    """
    if isinstance(sol, (list, tuple)):
        if series is not None or demand is not None or report is not None:
            raise AnalysisError("pass daily solution lists without series, demand or report")
        return _concat_reports([classify_exactness(s, gap_tol=gap_tol, bind_tol=bind_tol) for s in sol])
    part = _parts(sol)[0]
    _require_values(part)
    ir = part.ir
    if ir.meta.get("stage") == "two_stage":
        raise AnalysisError("condition labels are defined for day-ahead schedules only")
    if series is None:
        series = MarketSeries(ir.meta["lam"], ir.meta["wind"])
    if demand is None:
        demand = DemandSpec(ir.meta["periods"], ir.meta["d_max"])
    if report is None:
        report = relaxation_gap(part)
    plant = PlantConfig(**ir.meta["plant"])
    h = np.asarray(part.values["h"])
    p = np.asarray(part.values["p"])
    on = np.asarray(part.values["z_on"]) > 0.5
    pbar = np.minimum(series.wind, plant.p_max)
    gaps = report.gaps
    check = report.curve_model in RELAXED_MODELS

    binding, labels, observed, contra, neg_sets = [], [], [], [], []
    for n, (per, cap) in enumerate(zip(demand.periods, demand.d_max)):
        per = list(per)
        neg = [t for t in per if series.lam[t] <= 0]
        neg_sets.append(tuple(neg))
        bind = abs(h[per].sum() - cap) <= bind_tol
        gap_max = float(gaps[per].max(initial=0.0))
        obs = "inexact_observed" if gap_max > gap_tol else "exact_observed"
        if not bind:
            lab = "exact_by_thm1"
        elif all(series.lam[t] > 0 for t in per):
            lab = "exact_by_thm2"
        elif neg and abs(h[neg].sum() - cap) <= bind_tol:
            lab = "thm3_condition_met"
        else:
            lab = obs
        if check and lab in ("exact_by_thm1", "exact_by_thm2") and gap_max > gap_tol:
            contra.append(f"period {n + 1}: {lab} but max gap {gap_max:.3g} kg/h")
        if check and lab == "thm3_condition_met":
            room = [t for t in neg if series.lam[t] < 0 and on[t] and p[t] < pbar[t] - POWER_EPS]
            if room and float(gaps[neg].max(initial=0.0)) <= gap_tol:
                contra.append(f"period {n + 1}: thm3_condition_met with spare power in hours {room} but no gap")
        binding.append(bool(bind))
        labels.append(lab)
        observed.append(obs)

    return ExactnessReport(
        report.curve_model,
        report.gaps,
        report.period_gaps,
        tuple(tuple(per) for per in demand.periods),
        tuple(neg_sets),
        gaps_rt=report.gaps_rt,
        period_gaps_rt=report.period_gaps_rt,
        binding=tuple(binding),
        classification=tuple(labels),
        observed=tuple(observed),
        contradictions=tuple(contra),
    )


# ---------------------------------------------------------------------------
# ex-post evaluation
# ---------------------------------------------------------------------------

@dataclass
class ExPostReport:
    """Hydrogen re-evaluated on the tabulated curve at the optimal power.

    Totals are over the whole horizon. ``profit`` equals
    ``sales_revenue + chi * hydrogen_kg - startup_cost``. When a benchmark
    is given, ``deltas`` holds absolute differences (this minus benchmark)
    and ``percent`` the same relative to the benchmark's magnitude.
    """

    actual_h: np.ndarray
    model_h: np.ndarray
    approx_error: np.ndarray
    chi: float
    sales_mwh: float
    sales_revenue: float
    hydrogen_kg: float
    model_hydrogen_kg: float
    startup_cost: float
    profit: float
    deltas: dict = field(default_factory=dict)
    percent: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"profit_eur: {self.profit:.12g}",
            f"hydrogen_kg: {self.hydrogen_kg:.12g}",
            f"model_hydrogen_kg: {self.model_hydrogen_kg:.12g}",
            f"sales_mwh: {self.sales_mwh:.12g}",
            f"sales_revenue_eur: {self.sales_revenue:.12g}",
            f"startup_cost_eur: {self.startup_cost:.12g}",
            f"max_abs_approx_error_kg_h: {float(np.abs(self.approx_error).max(initial=0.0)):.12g}",
        ]
        for k in sorted(self.deltas):
            lines.append(f"delta_{k}: {self.deltas[k]:.12g}")
        for k in sorted(self.percent):
            lines.append(f"percent_{k}: {self.percent[k]:.12g}")
        return "\n".join(lines) + "\n"


def _pct(x: float, ref: float) -> float:
    if ref == 0:
        return 0.0 if x == ref else math.copysign(math.inf, x - ref)
    return 100.0 * (x - ref) / abs(ref)


def expost(sol, curve: TabulatedCurve, plant: PlantConfig | None = None, benchmark=None, tol: float = 1e-9) -> ExPostReport:
    """Evaluate a schedule on the tabulated curve.

    On-state hours produce ``evaluate(curve, p)``; standby and off hours
    produce nothing. The extra or missing hydrogen is not checked against
    the demand caps.

    Args:
        sol: ScheduleSolution, StochasticSolution (first stage) or a list
            of daily ScheduleSolutions.
        curve: tabulated production curve used as ground truth.
        plant: plant parameters; defaults to those stored in the IR.
        benchmark: optional solution of the same horizon to compare with.

    Raises:
        ExPostDomainError: if an on-state power lies outside the curve's
            domain by more than ``tol``.
    """
    V = _stacked(sol, ("f", "p", "h", "z_on", "z_su"))
    if plant is None:
        plant = PlantConfig(**_parts(sol)[0].ir.meta["plant"])
    on = V["z_on"] > 0.5
    p_on = V["p"][on]
    if p_on.size and (p_on.min() < curve.p_min - tol or p_on.max() > curve.p_max + tol):
        raise ExPostDomainError(
            f"on-state power range [{p_on.min():.6g}, {p_on.max():.6g}] outside curve domain "
            f"[{curve.p_min}, {curve.p_max}]"
        )
    actual = np.zeros_like(V["p"])
    actual[on] = evaluate(curve, np.clip(p_on, curve.p_min, curve.p_max))
    revenue = float(V["lam"] @ V["f"])
    hyd = float(actual.sum())
    startup = plant.k_su * float(np.round(V["z_su"]).sum())
    rep = ExPostReport(
        actual,
        V["h"],
        V["h"] - actual,
        plant.chi,
        float(V["f"].sum()),
        revenue,
        hyd,
        float(V["h"].sum()),
        startup,
        revenue + plant.chi * hyd - startup,
    )
    if benchmark is not None:
        ref = expost(benchmark, curve, plant, None, tol)
        if ref.actual_h.size != rep.actual_h.size:
            raise AnalysisError("benchmark covers a different horizon")
        for k in ("profit", "hydrogen_kg", "sales_mwh", "sales_revenue", "startup_cost"):
            rep.deltas[k] = getattr(rep, k) - getattr(ref, k)
            rep.percent[k] = _pct(getattr(rep, k), getattr(ref, k))
    return rep


# ---------------------------------------------------------------------------
# dispatch comparison
# ---------------------------------------------------------------------------

@dataclass
class DispatchDiff:
    """Hourly relative power difference against a benchmark schedule.

    ``gamma_t`` is NaN in excluded hours (benchmark power at most 1e-6 MW).
    ``gamma_bar`` divides the summed magnitudes by the full horizon
    length; ``gamma_mean_included`` by the number of included hours.
    """

    gamma_t: np.ndarray
    gamma_bar: float
    gamma_mean_included: float
    excluded: tuple

    def to_text(self) -> str:
        return (
            f"gamma_bar: {self.gamma_bar:.12g}\n"
            f"gamma_mean_included: {self.gamma_mean_included:.12g}\n"
            f"excluded_hours: {' '.join(str(t) for t in self.excluded)}\n"
        )


def dispatch_diff(sol, benchmark_sol, threshold: float = POWER_EPS) -> DispatchDiff:
    p = _stacked(sol, ("p",))["p"]
    ref = _stacked(benchmark_sol, ("p",))["p"]
    if p.shape != ref.shape:
        raise AnalysisError(f"horizons differ: {p.size} vs {ref.size}")
    inc = ref > threshold
    gamma = np.full(p.shape, np.nan)
    gamma[inc] = (p[inc] - ref[inc]) / ref[inc]
    mag = np.abs(gamma[inc])
    return DispatchDiff(
        gamma,
        float(mag.sum() / p.size),
        float(mag.mean()) if mag.size else 0.0,
        tuple(int(t) for t in np.flatnonzero(~inc)),
    )


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkRecord:
    """Timing of repeated two-stage solves for one model and scenario count.

    ``consistent`` is ``None`` when repetitions use different scenario
    draws, otherwise whether all objectives agree.
    """

    model: str
    n_segments: int | None
    n_scenarios: int
    repetitions: int
    mean_time: float
    times: tuple
    objectives: tuple
    statuses: tuple
    consistent: bool | None = None
    parallel: bool = False


def parse_model_id(model: str) -> tuple[str, int | None]:
    """``"mil10"`` -> ``("mil", 10)``, ``"soc"`` -> ``("soc", None)``."""
    m = model.strip().lower()
    for kind in ("misoc", "mil", "soc", "l"):
        if m.startswith(kind):
            rest = m[len(kind):]
            if kind == "soc":
                if rest:
                    break
                return kind, None
            if not rest.isdigit() or int(rest) < 1:
                break
            return kind, int(rest)
    raise AnalysisError(f"unknown model id {model!r} (expected e.g. mil10, l10, soc, misoc2)")


def curve_data_for(kind: str, n_segments: int | None, curve: TabulatedCurve, peak_weight=None):
    from .curve import DEFAULT_PEAK_WEIGHT, fit_quadratic, linearize, partition_breakpoints, quadratic_per_segment

    if kind in ("mil", "l"):
        return linearize(curve, partition_breakpoints(curve, n_segments))
    if kind == "soc":
        return fit_quadratic(curve, DEFAULT_PEAK_WEIGHT if peak_weight is None else peak_weight)
    return quadratic_per_segment(curve, n_segments)


def _bench_instance(args):
    model, n_scen, seed, T, plant, curve, cfg, backend, market = args
    from .solver import solve_bnb
    from .stochastic import ScenarioSet, build_two_stage, synthetic_scenarios
    from .model import full_load_demand

    kind, S = parse_model_id(model)
    wind_rt = synthetic_scenarios(market.wind, n_scen, seed)
    scen = ScenarioSet.with_default_prices(wind_rt, market.lam)
    series = scen.day_ahead_series(market.lam)
    demand = DemandSpec.default(T, full_load_demand(curve, hours=24 if T % 24 == 0 else T))
    ir = build_two_stage(plant, series, demand, scen, kind, curve_data_for(kind, S, curve))
    t0 = time.perf_counter()
    res = solve_bnb(ir, cfg, backend)
    return time.perf_counter() - t0, res.objective, res.status


def run_benchmark(
    models: Sequence[str],
    scenario_counts: Sequence[int],
    repetitions: int = 1,
    seed: int = 0,
    T: int = 24,
    plant: PlantConfig | None = None,
    curve: TabulatedCurve | None = None,
    cfg=None,
    backend="auto",
    market: MarketSeries | None = None,
    perturb: bool = True,
    parallel: bool = False,
    rel_tol: float = 1e-6,
) -> list[BenchmarkRecord]:
    """Time two-stage solves per model id and scenario count.

    Repetition ``r`` draws scenarios with seed ``seed + r`` (or ``seed``
    for every repetition when ``perturb`` is false, in which case the
    objectives must agree within ``rel_tol``). Limit statuses are recorded,
    not raised. ``parallel=True`` runs repetitions in worker processes;
    its timings are not comparable with sequential runs.
    """
    from .curve import default_curve
    from .data import synthetic_market

    if repetitions < 1:
        raise AnalysisError("repetitions must be >= 1")
    plant = PlantConfig() if plant is None else plant
    curve = default_curve() if curve is None else curve
    market = synthetic_market(T, seed) if market is None else market
    if market.T != T:
        raise AnalysisError(f"market horizon {market.T} differs from T={T}")
    for m in models:
        parse_model_id(m)
    out = []
    for model in models:
        kind, S = parse_model_id(model)
        for n_scen in scenario_counts:
            jobs = [
                (model, n_scen, seed + r if perturb else seed, T, plant, curve, cfg, backend, market)
                for r in range(repetitions)
            ]
            if parallel:
                with ProcessPoolExecutor() as ex:
                    runs = list(ex.map(_bench_instance, jobs))
            else:
                runs = [_bench_instance(j) for j in jobs]
            times = tuple(r[0] for r in runs)
            objs = tuple(r[1] for r in runs)
            consistent = None
            if not perturb:
                ref = objs[0]
                consistent = all(abs(o - ref) <= rel_tol * max(1.0, abs(ref)) for o in objs)
            out.append(
                BenchmarkRecord(
                    model, S, n_scen, repetitions, float(np.mean(times)), times, objs,
                    tuple(r[2] for r in runs), consistent, parallel,
                )
            )
    return out


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------

def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def gaps_csv(report: ExactnessReport, comments=()) -> str:
    """``hour,gap_kg_h`` rows, plus one column per scenario for two-stage runs."""
    header = ["hour", "gap_kg_h"]
    rows = []
    n_rt = 0 if report.gaps_rt is None else report.gaps_rt.shape[1]
    header += [f"gap_rt_{w + 1}" for w in range(n_rt)]
    for t in range(report.gaps.size):
        row = [t, _fmt(report.gaps[t])]
        if n_rt:
            row += [_fmt(v) for v in report.gaps_rt[t]]
        rows.append(row)
    return _csv_text(header, rows, comments)


def gamma_csv(diff: DispatchDiff, comments=()) -> str:
    rows = [[t, _fmt(g), int(t in diff.excluded)] for t, g in enumerate(diff.gamma_t)]
    return _csv_text(["hour", "gamma", "excluded"], rows, comments)


def bench_csv(records: Sequence[BenchmarkRecord], comments=()) -> str:
    rows = []
    for r in records:
        for k, (t, o, s) in enumerate(zip(r.times, r.objectives, r.statuses)):
            rows.append([r.model, r.n_segments or "", r.n_scenarios, k + 1, repr(t), _fmt(o), s])
    return _csv_text(["model", "segments", "scenarios", "repetition", "wall_time_s", "objective", "status"], rows, comments)
