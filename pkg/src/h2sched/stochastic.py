"""Two-stage (day-ahead + real-time) stochastic scheduling.

First stage: the deterministic day-ahead problem (sales ``f``, consumption
``p``, production ``h``, states). Second stage, per wind scenario ``w``:
imbalance sales ``d_up`` and purchases ``d_down`` at real-time prices,
re-dispatched consumption ``p_rt`` and production ``h_rt``, and real-time
states with their own startups. The expected profit adds, per scenario and
step, ``d_up*lam_up - d_down*lam_down + (h_rt - h)*chi - z_su_rt*k_su``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ir import ProblemIR
from .model import (
    DemandSpec,
    MarketSeries,
    ModelError,
    PlantConfig,
    ScheduleSolution,
    add_state_block,
    build_base,
    curve_block,
    curve_meta,
    validate_curve_data,
)


@dataclass(frozen=True)
class ScenarioSet:
    """Real-time wind scenarios with probabilities and imbalance prices.

    ``wind_rt`` has shape (T, n_scenarios).
    """

    probabilities: np.ndarray
    wind_rt: np.ndarray
    lambda_up: np.ndarray
    lambda_down: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.probabilities, dtype=float).reshape(-1)
        w = np.asarray(self.wind_rt, dtype=float)
        up = np.asarray(self.lambda_up, dtype=float).reshape(-1)
        dn = np.asarray(self.lambda_down, dtype=float).reshape(-1)
        if w.ndim != 2 or w.shape[1] != pi.size:
            raise ModelError("wind_rt must have shape (T, number of scenarios)")
        if up.shape != (w.shape[0],) or dn.shape != (w.shape[0],):
            raise ModelError("imbalance price series must have length T")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ModelError("scenario probabilities must be nonnegative and sum to 1")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ModelError("real-time wind must be finite and nonnegative")
        for name, arr in (("probabilities", pi), ("wind_rt", w), ("lambda_up", up), ("lambda_down", dn)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return int(self.probabilities.size)

    @property
    def T(self) -> int:
        return int(self.wind_rt.shape[0])

    def mean_wind(self) -> np.ndarray:
        """Probability-weighted scenario mean, used as the day-ahead forecast."""
        return self.wind_rt @ self.probabilities

    def day_ahead_series(self, lam) -> MarketSeries:
        return MarketSeries(lam, self.mean_wind())

    def check_prices(self, lam) -> None:
        lam = np.asarray(lam, dtype=float)
        if not (np.all(self.lambda_up < lam) and np.all(self.lambda_down > lam)):
            raise ModelError("imbalance prices must satisfy lambda_up < lambda < lambda_down")

    @classmethod
    def with_default_prices(cls, wind_rt, lam, probabilities=None, delta: float = 1.0) -> "ScenarioSet":
        """0.9/1.1 times the day-ahead price, or lam -/+ delta where lam <= 0."""
        wind_rt = np.asarray(wind_rt, dtype=float)
        if probabilities is None:
            probabilities = np.full(wind_rt.shape[1], 1.0 / wind_rt.shape[1])
        up, down = default_imbalance_prices(lam, delta)
        return cls(probabilities, wind_rt, up, down)


def default_imbalance_prices(lam, delta: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float)
    pos = lam > 0
    up = np.where(pos, 0.9 * lam, lam - delta)
    down = np.where(pos, 1.1 * lam, lam + delta)
    return up, down


def synthetic_scenarios(
    base_wind,
    n: int,
    seed: int,
    capacity: float = 2.0,
    sigma: float = 0.15,
    reversion: float = 0.3,
) -> np.ndarray:
    """Seeded real-time wind scenarios around a forecast profile.

    Each scenario multiplies the profile by ``exp(x_t)``, where ``x`` is a
    mean-reverting AR(1) process started at 0, and clips to
    ``[0, 2 * capacity]``. Returns an array of shape (T, n).
    """
    base = np.asarray(base_wind, dtype=float)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((base.size, n))
    x = np.zeros((base.size, n))
    prev = np.zeros(n)
    for t in range(base.size):
        prev = (1.0 - reversion) * prev + sigma * eps[t]
        x[t] = prev
    return np.clip(base[:, None] * np.exp(x), 0.0, 2.0 * capacity)


def build_two_stage(
    plant: PlantConfig,
    series: MarketSeries,
    demand: DemandSpec,
    scen: ScenarioSet,
    curve_model: str,
    curve_data,
    initial_off: bool = False,
    mean_tol: float = 1e-6,
) -> ProblemIR:
    """Two-stage stochastic IR for one curve model.

    The first-stage block is identical to the deterministic build; the
    day-ahead wind in ``series`` must equal the scenario mean.
    """
    T = series.T
    if scen.T != T:
        raise ModelError(f"scenario horizon {scen.T} differs from market horizon {T}")
    if np.max(np.abs(scen.mean_wind() - series.wind)) > mean_tol:
        raise ModelError("day-ahead wind must equal the probability-weighted scenario mean (see ScenarioSet.day_ahead_series)")
    scen.check_prices(series.lam)
    data = validate_curve_data(curve_model, curve_data, plant)
    ir = build_base(plant, series, demand, initial_off)
    H = ir.handles
    curve_block(ir, curve_model, data, plant, H["p"], H["h"], H["z_on"], H["z_sb"], "", "curve")

    f, p, h = H["f"], H["p"], H["h"]
    shape = (T, scen.n)
    d_up = ir.add_vars("d_up", shape, group="rt")
    d_down = ir.add_vars("d_down", shape, group="rt")
    p_rt = ir.add_vars("p_rt", shape, group="rt")
    h_rt = ir.add_vars("h_rt", shape, group="rt")
    z = add_state_block(ir, plant, p_rt, "_rt", "states_rt", initial_off)
    curve_block(ir, curve_model, data, plant, p_rt, h_rt, z["z_on"], z["z_sb"], "_rt", "curve_rt")

    for t in range(T):
        for w in range(scen.n):
            lab = f"{t + 1},{w + 1}"
            ir.add_linear(
                f"balance_rt[{lab}]",
                {d_up[t, w]: 1, d_down[t, w]: -1, p_rt[t, w]: 1, p[t]: -1},
                "==", float(scen.wind_rt[t, w] - series.wind[t]), "rt",
            )
            ir.add_linear(f"no_purchase_rt[{lab}]", {f[t]: 1, d_down[t, w]: -1}, ">=", 0, "rt")
    for w in range(scen.n):
        for n, per in enumerate(demand.periods):
            ir.add_linear(f"demand_rt[{n + 1},{w + 1}]", {h_rt[t, w]: 1 for t in per}, "<=", demand.d_max[n], "rt")

    obj = {}
    for w in range(scen.n):
        pi = float(scen.probabilities[w])
        for t in range(T):
            obj[d_up[t, w]] = pi * float(scen.lambda_up[t])
            obj[d_down[t, w]] = -pi * float(scen.lambda_down[t])
            obj[h_rt[t, w]] = pi * plant.chi
            obj[z["z_su"][t, w]] = -pi * plant.k_su
    # the -h*chi term carries total probability one
    for t in range(T):
        obj[h[t]] = -plant.chi
    ir.add_objective(obj)
    ir.meta.update(
        stage="two_stage",
        curve_model=curve_model,
        curve=curve_meta(curve_model, data),
        scenarios={
            "probabilities": scen.probabilities.tolist(),
            "wind_rt": scen.wind_rt.tolist(),
            "lambda_up": scen.lambda_up.tolist(),
            "lambda_down": scen.lambda_down.tolist(),
        },
    )
    return ir


@dataclass
class StochasticSolution:
    """First-stage schedule plus per-scenario real-time values (shape (T, n))."""

    first_stage: ScheduleSolution
    rt: dict
    expected_objective: float
    status: str

    @classmethod
    def from_result(cls, ir: ProblemIR, result) -> "StochasticSolution":
        sol = ScheduleSolution.from_result(ir, result)
        rt_keys = [k for k in sol.values if k.endswith("_rt") or k in ("d_up", "d_down")]
        rt = {k: sol.values[k] for k in rt_keys}
        return cls(sol, rt, result.objective, result.status)

    def __getattr__(self, name):
        rt = self.__dict__.get("rt", {})
        if name in rt:
            return rt[name]
        raise AttributeError(name)


def solve_two_stage(ir: ProblemIR, cfg=None, backend="auto") -> StochasticSolution:
    from .solver import solve_bnb

    return StochasticSolution.from_result(ir, solve_bnb(ir, cfg, backend))
