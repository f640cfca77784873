"""Command-line front end.

Usage::

    h2sched COMMAND [--config FILE] [--model KIND] [--segments N]
                    [--scenarios N] [--seed N] [--out DIR] [--backend NAME]

Commands: fit, segment, solve, stochastic, check, expost, compare, bench.
Every output file starts with a ``# config_hash=...`` provenance line. On
failure an ``error.json`` record is written to the output directory and the
exit code is nonzero (2 for configuration errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .analysis import (
    ExactnessReport,
    apriori_check,
    bench_csv,
    classify_exactness,
    curve_data_for,
    dispatch_diff,
    expost,
    gamma_csv,
    gaps_csv,
    parse_model_id,
    relaxation_gap,
    run_benchmark,
)
from .curve import default_curve, evaluate, fit_quadratic, partition_counts, peak_efficiency, read_curve_csv
from .data import read_market_csv, read_scenarios_csv, synthetic_market
from .model import CURVE_MODELS, DemandSpec, MarketSeries, PlantConfig, build, solve, solve_daily
from .solver import BACKENDS, BnBConfig
from .stochastic import ScenarioSet, StochasticSolution, build_two_stage, synthetic_scenarios

COMMANDS = ("fit", "segment", "solve", "stochastic", "check", "expost", "compare", "bench")

# every accepted key with its default; the config file may only use these
DEFAULTS = {
    "seed": 0,
    "out": "results",
    "plant": {"p_max": 1.0, "p_min": 0.15, "p_sb": 0.01, "k_su": 50.0, "chi": 2.1},
    "curve": {"path": "", "peak_weight": 10.0},
    "model": {"kind": "soc", "segments": 10},
    "demand": {"share": 0.6, "d_max": -1.0},
    "market": {"path": "", "hours": 24, "wind_capacity": 2.0},
    "solver": {
        "backend": "auto",
        "rel_gap": 1e-6,
        "time_limit": 0.0,
        "node_limit": 0,
        "branching": "pseudocost",
        "workers": 1,
    },
    "scenarios": {"count": 5, "path": "", "probabilities": ""},
    "compare": {"benchmark": "mil24"},
    "bench": {"models": ["l10", "mil10"], "scenarios": [1, 5], "repetitions": 1, "parallel": False},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, new: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in new.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where}{key!r} must be a table")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            ref = base[key]
            if isinstance(ref, bool) != isinstance(val, bool):
                raise ConfigError(f"config key {where}{key!r} has the wrong type")
            if isinstance(ref, float) and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if not isinstance(val, type(ref)):
                raise ConfigError(f"config key {where}{key!r} must be {type(ref).__name__}")
            out[key] = val
    return out


@dataclass
class RunConfig:
    """Resolved settings for one CLI run (see ``DEFAULTS`` for the keys)."""

    values: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        vals = copy.deepcopy(DEFAULTS)
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file {path} not found")
            try:
                raw = tomllib.loads(path.read_text())
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
            vals = _merge(vals, raw, "")
            base = path.resolve().parent
        if overrides:
            vals = _merge(vals, overrides, "")
        cfg = cls(vals, base)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def path(self, value: str) -> Path | None:
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        kind = self["model"]["kind"]
        if kind not in CURVE_MODELS:
            raise ConfigError(f"model must be one of {', '.join(CURVE_MODELS)}")
        if self["model"]["segments"] < 1:
            raise ConfigError("segments must be >= 1")
        if self["solver"]["backend"] not in BACKENDS:
            raise ConfigError(f"backend must be one of {', '.join(sorted(BACKENDS))}")
        if self["scenarios"]["count"] < 1:
            raise ConfigError("scenario count must be >= 1")
        if self["market"]["hours"] < 1:
            raise ConfigError("hours must be >= 1")
        for sect, key in (("curve", "path"), ("market", "path"), ("scenarios", "path"), ("scenarios", "probabilities")):
            p = self.path(self[sect][key])
            if p is not None and not p.is_file():
                raise ConfigError(f"{sect}.{key}: file {p} not found")
        try:
            for m in [self["compare"]["benchmark"], *self["bench"]["models"]]:
                parse_model_id(m)
            self.plant()
            self.bnb()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def digest(self) -> str:
        """Hash of the resolved settings (except ``out``) and referenced file contents."""
        vals = {k: v for k, v in self.values.items() if k != "out"}
        h = hashlib.sha256(json.dumps(vals, sort_keys=True).encode())
        for sect, key in (("curve", "path"), ("market", "path"), ("scenarios", "path"), ("scenarios", "probabilities")):
            p = self.path(self[sect][key])
            if p is not None:
                h.update(p.read_bytes())
        return h.hexdigest()[:16]

    def plant(self) -> PlantConfig:
        return PlantConfig(**self["plant"])

    def bnb(self) -> BnBConfig:
        s = self["solver"]
        return BnBConfig(
            rel_gap=s["rel_gap"],
            time_limit=s["time_limit"] or None,
            node_limit=s["node_limit"] or None,
            branching=s["branching"],
            workers=s["workers"],
        )


@dataclass
class ResultBundle:
    """Outputs of one command plus provenance."""

    command: str
    provenance: dict
    files: dict = field(default_factory=dict)
    solution: object = None
    exactness: ExactnessReport | None = None
    expost: object = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def _curve(cfg: RunConfig):
    p = cfg.path(cfg["curve"]["path"])
    if p is not None:
        return read_curve_csv(p)
    pl = cfg["plant"]
    return default_curve(p_max=pl["p_max"], p_min_share=pl["p_min"] / pl["p_max"])


def _market(cfg: RunConfig) -> MarketSeries:
    p = cfg.path(cfg["market"]["path"])
    if p is not None:
        return read_market_csv(p, cfg["market"]["wind_capacity"])
    return synthetic_market(cfg["market"]["hours"], cfg["seed"], cfg["market"]["wind_capacity"])


def _demand(cfg: RunConfig, curve, T: int) -> DemandSpec:
    d = cfg["demand"]
    if d["d_max"] >= 0:
        return DemandSpec.default(T, d["d_max"])
    hours = 24 if T % 24 == 0 else T
    return DemandSpec.default(T, d["share"] * hours * float(evaluate(curve, curve.p_max)))


def _curve_data(cfg: RunConfig, curve, model: str | None = None):
    if model is None:
        kind, S = cfg["model"]["kind"], cfg["model"]["segments"]
    else:
        kind, S = parse_model_id(model)
    if kind == "soc":
        from .curve import fit_quadratic

        return kind, fit_quadratic(curve, cfg["curve"]["peak_weight"])
    return kind, curve_data_for(kind, S, curve)


def _model_label(cfg: RunConfig) -> str:
    kind = cfg["model"]["kind"]
    return kind if kind == "soc" else f"{kind}{cfg['model']['segments']}"


def _solve_det(cfg: RunConfig, model: str | None = None):
    curve = _curve(cfg)
    market = _market(cfg)
    demand = _demand(cfg, curve, market.T)
    kind, data = _curve_data(cfg, curve, model)
    backend = cfg["solver"]["backend"]
    if market.T > 24 and market.T % 24 == 0:
        sol = solve_daily(cfg.plant(), market, demand, kind, data, cfg.bnb(), backend)
    else:
        sol = solve(build(cfg.plant(), market, demand, kind, data), cfg.bnb(), backend)
        if sol.status != "optimal":
            raise RuntimeError(f"solver returned status {sol.status}")
    return sol, curve, market, demand


def _values(sol, keys):
    parts = sol if isinstance(sol, list) else [sol.first_stage if isinstance(sol, StochasticSolution) else sol]
    return {k: np.concatenate([np.asarray(p.values[k]) for p in parts]) for k in keys}


def _states(sol):
    parts = sol if isinstance(sol, list) else [sol.first_stage if isinstance(sol, StochasticSolution) else sol]
    return np.concatenate([p.state for p in parts])


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _header(bundle: ResultBundle) -> list[str]:
    p = bundle.provenance
    return [f"config_hash={p['config_hash']} seed={p['seed']} version={p['version']} command={bundle.command}"]


def _write(out: Path, name: str, text: str, bundle: ResultBundle):
    path = out / name
    path.write_text(text)
    bundle.files[name] = path


def _report(bundle: ResultBundle, sections: list[tuple[str, str]]) -> str:
    lines = ["# " + _header(bundle)[0]]
    for title, body in sections:
        lines.append(f"[{title}]")
        lines.append(body.rstrip("\n"))
    return "\n".join(lines) + "\n"


def _solution_csv(sol, bundle) -> str:
    from .analysis import _csv_text

    v = _values(sol, ("f", "p", "h"))
    st = _states(sol)
    rows = [[t, repr(float(v["f"][t])), repr(float(v["p"][t])), repr(float(v["h"][t])), st[t]] for t in range(st.size)]
    return _csv_text(["hour", "f", "p", "h", "state"], rows, _header(bundle))


def _objective(sol) -> float:
    if isinstance(sol, list):
        return float(sum(s.objective for s in sol))
    return float(sol.expected_objective if isinstance(sol, StochasticSolution) else sol.objective)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_fit(cfg, bundle, out):
    from .analysis import _csv_text

    curve = _curve(cfg)
    q = fit_quadratic(curve, cfg["curve"]["peak_weight"])
    p_star, eta = peak_efficiency(curve)
    rows = [[repr(float(p)), repr(float(h)), repr(float(q(p)))] for p, h in zip(curve.power, curve.hydrogen)]
    _write(out, "fit.csv", _csv_text(["p_mw", "h_tabulated", "h_quadratic"], rows, _header(bundle)), bundle)
    body = (
        f"a: {q.a:.12g}\nb: {q.b:.12g}\nc: {q.c:.12g}\nsign_pattern_ok: {str(q.sign_ok).lower()}\n"
        f"peak_efficiency_power_mw: {p_star:.12g}\npeak_efficiency_kg_mwh: {eta:.12g}\n"
        f"max_abs_fit_error_kg_h: {float(np.max(np.abs(q(curve.power) - curve.hydrogen))):.12g}\n"
    )
    _write(out, "report.txt", _report(bundle, [("fit", body)]), bundle)
    bundle.extra["quadratic"] = q


def _cmd_segment(cfg, bundle, out):
    from .analysis import _csv_text

    curve = _curve(cfg)
    S = cfg["model"]["segments"]
    segs = curve_data_for("mil", S, curve)
    rows = [[k + 1, repr(s.p_lo), repr(s.p_hi), repr(s.slope), repr(s.intercept)] for k, s in enumerate(segs)]
    _write(out, "segments.csv", _csv_text(["segment", "p_lo", "p_hi", "slope", "intercept"], rows, _header(bundle)), bundle)
    left, right = (S, 0) if S == 1 else partition_counts(curve, S)
    err = float(np.max(np.abs(segs(curve.power) - curve.hydrogen)))
    body = f"segments: {S}\nleft_of_peak: {left}\nright_of_peak: {right}\nmax_abs_error_kg_h: {err:.12g}\n"
    _write(out, "report.txt", _report(bundle, [("segment", body)]), bundle)
    bundle.extra["segments"] = segs


def _cmd_solve(cfg, bundle, out, classify=False):
    sol, curve, market, demand = _solve_det(cfg)
    bundle.solution = sol
    rep = classify_exactness(sol) if classify else relaxation_gap(sol)
    bundle.exactness = rep
    post = expost(sol, curve, cfg.plant())
    bundle.expost = post
    _write(out, "solution.csv", _solution_csv(sol, bundle), bundle)
    _write(out, "gaps.csv", gaps_csv(rep, _header(bundle)), bundle)
    summary = f"model: {_model_label(cfg)}\nhours: {market.T}\nobjective_eur: {_objective(sol):.12g}\n"
    sections = [("solve", summary), ("exactness", rep.to_text())]
    if classify:
        kind, data = _curve_data(cfg, curve)
        if kind in ("soc", "l"):
            flags = apriori_check(market, demand, data, cfg.plant())
            sections.append(("apriori", "inexactness_possible: " + " ".join(str(b).lower() for b in flags) + "\n"))
    sections.append(("expost", post.to_text()))
    _write(out, "report.txt", _report(bundle, sections), bundle)
    if classify and rep.contradictions:
        raise RuntimeError("exactness contradictions: " + "; ".join(rep.contradictions))


def _cmd_stochastic(cfg, bundle, out):
    curve = _curve(cfg)
    market = _market(cfg)
    sp = cfg.path(cfg["scenarios"]["path"])
    if sp is not None:
        wind_rt, pi = read_scenarios_csv(sp, cfg.path(cfg["scenarios"]["probabilities"]))
        if wind_rt.shape[0] != market.T:
            raise ValueError(f"scenario file has {wind_rt.shape[0]} hours, market has {market.T}")
    else:
        wind_rt = synthetic_scenarios(market.wind, cfg["scenarios"]["count"], cfg["seed"], cfg["market"]["wind_capacity"])
        pi = None
    scen = ScenarioSet.with_default_prices(wind_rt, market.lam, pi)
    series = scen.day_ahead_series(market.lam)
    demand = _demand(cfg, curve, market.T)
    kind, data = _curve_data(cfg, curve)
    from .stochastic import solve_two_stage

    ir = build_two_stage(cfg.plant(), series, demand, scen, kind, data)
    sol = solve_two_stage(ir, cfg.bnb(), cfg["solver"]["backend"])
    if sol.status != "optimal":
        raise RuntimeError(f"solver returned status {sol.status}")
    bundle.solution = sol
    rep = relaxation_gap(sol)
    bundle.exactness = rep
    _write(out, "solution.csv", _solution_csv(sol, bundle), bundle)
    _write(out, "gaps.csv", gaps_csv(rep, _header(bundle)), bundle)
    summary = (
        f"model: {_model_label(cfg)}\nhours: {market.T}\nscenarios: {scen.n}\n"
        f"expected_objective_eur: {sol.expected_objective:.12g}\n"
    )
    _write(out, "report.txt", _report(bundle, [("stochastic", summary), ("exactness", rep.to_text())]), bundle)


def _cmd_expost(cfg, bundle, out):
    sol, curve, market, _ = _solve_det(cfg)
    ref, _, _, _ = _solve_det(cfg, cfg["compare"]["benchmark"])
    post = expost(sol, curve, cfg.plant(), benchmark=ref)
    bundle.solution, bundle.expost = sol, post
    from .analysis import _csv_text

    rows = [
        [t, repr(float(a)), repr(float(m)), repr(float(e))]
        for t, (a, m, e) in enumerate(zip(post.actual_h, post.model_h, post.approx_error))
    ]
    _write(out, "expost.csv", _csv_text(["hour", "h_actual", "h_model", "approx_error"], rows, _header(bundle)), bundle)
    _write(out, "solution.csv", _solution_csv(sol, bundle), bundle)
    head = f"model: {_model_label(cfg)}\nbenchmark: {cfg['compare']['benchmark']}\nhours: {market.T}\n"
    _write(out, "report.txt", _report(bundle, [("expost", head + post.to_text())]), bundle)


def _cmd_compare(cfg, bundle, out):
    sol, _, market, _ = _solve_det(cfg)
    ref, _, _, _ = _solve_det(cfg, cfg["compare"]["benchmark"])
    diff = dispatch_diff(sol, ref)
    bundle.solution = sol
    bundle.extra["dispatch_diff"] = diff
    _write(out, "gamma.csv", gamma_csv(diff, _header(bundle)), bundle)
    head = f"model: {_model_label(cfg)}\nbenchmark: {cfg['compare']['benchmark']}\nhours: {market.T}\n"
    _write(out, "report.txt", _report(bundle, [("compare", head + diff.to_text())]), bundle)


def _cmd_bench(cfg, bundle, out):
    b = cfg["bench"]
    market = _market(cfg)
    records = run_benchmark(
        b["models"], b["scenarios"], b["repetitions"], cfg["seed"], T=market.T, plant=cfg.plant(),
        curve=_curve(cfg), cfg=cfg.bnb(), backend=cfg["solver"]["backend"], market=market, parallel=b["parallel"],
    )
    bundle.extra["records"] = records
    _write(out, "bench.csv", bench_csv(records, _header(bundle)), bundle)
    lines = []
    for r in records:
        lines.append(
            f"model={r.model} scenarios={r.n_scenarios} repetitions={r.repetitions} "
            f"statuses={','.join(sorted(set(r.statuses)))}"
        )
    if b["parallel"]:
        lines.append("note: repetitions ran in parallel; wall times are not comparable with sequential runs")
    _write(out, "report.txt", _report(bundle, [("bench", "\n".join(lines) + "\n")]), bundle)


HANDLERS = {
    "fit": _cmd_fit,
    "segment": _cmd_segment,
    "solve": _cmd_solve,
    "stochastic": _cmd_stochastic,
    "check": lambda cfg, bundle, out: _cmd_solve(cfg, bundle, out, classify=True),
    "expost": _cmd_expost,
    "compare": _cmd_compare,
    "bench": _cmd_bench,
}


def run_command(cfg: RunConfig, command: str) -> ResultBundle:
    """Run one command and write its files to the configured output directory."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    out = cfg.path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    bundle = ResultBundle(command, {"config_hash": cfg.digest(), "seed": cfg["seed"], "version": __version__})
    HANDLERS[command](cfg, bundle, out)
    return bundle


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="h2sched", description="Wind/electrolyzer scheduling and exactness analysis.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--model", choices=CURVE_MODELS)
    ap.add_argument("--segments", type=int)
    ap.add_argument("--scenarios", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--backend", choices=sorted(BACKENDS))
    return ap


def _overrides(args) -> dict:
    ov = {}
    if args.model is not None:
        ov.setdefault("model", {})["kind"] = args.model
    if args.segments is not None:
        ov.setdefault("model", {})["segments"] = args.segments
    if args.scenarios is not None:
        ov.setdefault("scenarios", {})["count"] = args.scenarios
    if args.seed is not None:
        ov["seed"] = args.seed
    if args.out is not None:
        ov["out"] = str(Path(args.out).resolve())
    if args.backend is not None:
        ov.setdefault("solver", {})["backend"] = args.backend
    return ov


def _error_record(out: Path, command: str, exc: Exception, digest: str | None):
    out.mkdir(parents=True, exist_ok=True)
    rec = {"command": command, "error": type(exc).__name__, "message": str(exc), "config_hash": digest}
    (out / "error.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out) if args.out else Path(DEFAULTS["out"])
    cfg = None
    try:
        cfg = RunConfig.load(args.config, _overrides(args))
        out = cfg.path(cfg["out"])
        t0 = time.perf_counter()
        bundle = run_command(cfg, args.command)
    except ConfigError as exc:
        _error_record(out, args.command, exc, None)
        print(f"h2sched: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced as a machine-readable record
        _error_record(out, args.command, exc, cfg.digest() if cfg is not None else None)
        print(f"h2sched: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name in sorted(bundle.files):
        print(bundle.files[name])
    print(f"done in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
