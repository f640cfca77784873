"""CSV ingestion for market and scenario data, plus seeded synthetic inputs.

Market files have the header ``hour,price_eur_mwh,wind_cf`` with one row
per hour; wind capacity factors are scaled by the wind farm capacity.
Scenario files have the header ``hour,scenario,wind_mw``; probabilities
come from an optional sidecar ``scenario,probability`` (uniform if absent).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model import MarketSeries

MARKET_HEADER = ["hour", "price_eur_mwh", "wind_cf"]
SCENARIO_HEADER = ["hour", "scenario", "wind_mw"]
PROBABILITY_HEADER = ["scenario", "probability"]


class DataError(ValueError):
    """Malformed input file; the message names the file and line."""


def _rows(path: Path, header: list[str]):
    with open(path, newline="") as fh:
        lines = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row and not row[0].startswith("#")]
    if not lines:
        raise DataError(f"{path}: empty file")
    line, head = lines[0]
    if [c.strip() for c in head] != header:
        raise DataError(f"{path}:{line}: expected header {','.join(header)}")
    return lines[1:]


def _parse(path, line, row, types):
    if len(row) != len(types):
        raise DataError(f"{path}:{line}: expected {len(types)} fields, got {len(row)}")
    try:
        vals = [t(v.strip()) for t, v in zip(types, row)]
    except ValueError as exc:
        raise DataError(f"{path}:{line}: {exc}") from None
    for v in vals:
        if isinstance(v, float) and not np.isfinite(v):
            raise DataError(f"{path}:{line}: non-finite value")
    return vals


def _check_hours(path, hours):
    order = np.argsort(hours, kind="stable")
    h = np.asarray(hours)[order]
    if h.size and np.any(np.diff(h) != 1):
        raise DataError(f"{path}: hours must be consecutive integers")
    return order


def read_market_csv(path, wind_capacity: float = 2.0) -> MarketSeries:
    """Read hourly prices and wind capacity factors.

    Args:
        path: CSV file with header ``hour,price_eur_mwh,wind_cf``.
        wind_capacity: wind farm size in MW; ``W_t = wind_cf * capacity``.

    Raises:
        DataError: on a malformed row, a duplicated or missing hour, or a
            capacity factor outside [0, 1].
    """
    path = Path(path)
    seen = {}
    hours, lam, cf = [], [], []
    for line, row in _rows(path, MARKET_HEADER):
        hr, price, c = _parse(path, line, row, (int, float, float))
        if hr in seen:
            raise DataError(f"{path}:{line}: hour {hr} already given on line {seen[hr]}")
        if not 0.0 <= c <= 1.0:
            raise DataError(f"{path}:{line}: wind_cf {c} outside [0, 1]")
        seen[hr] = line
        hours.append(hr)
        lam.append(price)
        cf.append(c)
    if not hours:
        raise DataError(f"{path}: no data rows")
    order = _check_hours(path, hours)
    return MarketSeries(np.asarray(lam)[order], np.asarray(cf)[order] * wind_capacity)


def write_market_csv(series: MarketSeries, path, wind_capacity: float = 2.0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MARKET_HEADER)
        for t in range(series.T):
            w.writerow([t, repr(float(series.lam[t])), repr(float(series.wind[t] / wind_capacity))])


def read_scenarios_csv(path, probabilities_path=None) -> tuple[np.ndarray, np.ndarray]:
    """Read real-time wind scenarios.

    Returns:
        ``(wind_rt, probabilities)`` with ``wind_rt`` of shape (T, n).
        Every (hour, scenario) pair must appear exactly once.
    """
    path = Path(path)
    cells = {}
    for line, row in _rows(path, SCENARIO_HEADER):
        hr, sc, w = _parse(path, line, row, (int, int, float))
        if (hr, sc) in cells:
            raise DataError(f"{path}:{line}: duplicate entry for hour {hr}, scenario {sc}")
        if w < 0:
            raise DataError(f"{path}:{line}: negative wind {w}")
        cells[(hr, sc)] = w
    if not cells:
        raise DataError(f"{path}: no data rows")
    hours = sorted({k[0] for k in cells})
    scen = sorted({k[1] for k in cells})
    _check_hours(path, hours)
    if len(cells) != len(hours) * len(scen):
        raise DataError(f"{path}: every hour needs a value for every scenario")
    wind = np.array([[cells[(h, s)] for s in scen] for h in hours])
    if probabilities_path is None:
        return wind, np.full(len(scen), 1.0 / len(scen))
    ppath = Path(probabilities_path)
    probs = {}
    for line, row in _rows(ppath, PROBABILITY_HEADER):
        sc, pr = _parse(ppath, line, row, (int, float))
        if sc in probs:
            raise DataError(f"{ppath}:{line}: duplicate scenario {sc}")
        probs[sc] = pr
    if sorted(probs) != scen:
        raise DataError(f"{ppath}: scenarios do not match {path}")
    pi = np.array([probs[s] for s in scen])
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise DataError(f"{ppath}: probabilities must be nonnegative and sum to 1")
    return wind, pi / pi.sum()


def write_scenarios_csv(wind_rt, path, probabilities=None, probabilities_path=None) -> None:
    wind_rt = np.asarray(wind_rt, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_HEADER)
        for t in range(wind_rt.shape[0]):
            for s in range(wind_rt.shape[1]):
                w.writerow([t, s, repr(float(wind_rt[t, s]))])
    if probabilities_path is not None:
        pi = np.full(wind_rt.shape[1], 1.0 / wind_rt.shape[1]) if probabilities is None else probabilities
        with open(probabilities_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PROBABILITY_HEADER)
            for s, pr in enumerate(pi):
                w.writerow([s, repr(float(pr))])


def synthetic_market(
    hours: int = 24,
    seed: int = 0,
    wind_capacity: float = 2.0,
    mean_price: float = 45.0,
    wind_price_impact: float = 90.0,
) -> MarketSeries:
    """Seeded hourly prices and wind with a daily and a seasonal cycle.

    Capacity factors follow an AR(1) process in logit space; prices drop
    with wind (merit-order effect), so negative prices appear in a small
    share of windy hours.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    day = 2 * np.pi * (t % 24) / 24
    season = 2 * np.pi * t / 8760
    x = np.empty(hours)
    prev = 0.0
    eps = rng.standard_normal(hours)
    for k in range(hours):
        prev = 0.97 * prev + 0.3 * eps[k]
        x[k] = prev
    cf = 1.0 / (1.0 + np.exp(-(x - 0.2 + 0.4 * np.cos(season))))
    lam = (
        mean_price
        + 12 * np.sin(day - np.pi / 2) ** 2
        + 8 * np.cos(season)
        - wind_price_impact * (cf - 0.45)
        + rng.normal(0.0, 7.0, hours)
    )
    return MarketSeries(np.round(lam, 2), np.clip(cf, 0.0, 1.0) * wind_capacity)
