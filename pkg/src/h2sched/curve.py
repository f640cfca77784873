"""Hydrogen production curves and their approximations.

A :class:`TabulatedCurve` holds sampled ``(power, hydrogen)`` points of an
electrolyzer's production curve. From it this module derives

* a weighted least-squares quadratic (:func:`fit_quadratic`),
* breakpoints for piece-wise linearization (:func:`partition_breakpoints`)
  and the resulting chords (:func:`linearize`),
* endpoint-interpolating quadratic pieces (:func:`quadratic_per_segment`).

Units throughout: power in MW, hydrogen in kg/h.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class CurveError(ValueError):
    """Raised for invalid curves, out-of-domain queries and failed fits."""


class SignPatternWarning(UserWarning):
    """A fitted quadratic does not have the a < 0, b > 0, c < 0 pattern."""


# Fixed left/right segment counts for the commonly used segment numbers.
PARTITION_TABLE = {2: (1, 1), 10: (2, 8), 24: (4, 20)}

DEFAULT_PEAK_WEIGHT = 10.0


@dataclass(frozen=True)
class TabulatedCurve:
    """Sampled hydrogen production curve.

    Args:
        power: strictly increasing power samples [MW]; first is ``p_min``,
            last is ``p_max``.
        hydrogen: hydrogen production at each sample [kg/h], nonnegative
            and nondecreasing.
    """

    power: np.ndarray
    hydrogen: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.power, dtype=float)
        h = np.asarray(self.hydrogen, dtype=float)
        if p.ndim != 1 or p.shape != h.shape:
            raise CurveError("power and hydrogen must be 1-d arrays of equal length")
        if p.size < 2:
            raise CurveError("a curve needs at least two points")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(h))):
            raise CurveError("curve samples must be finite")
        if np.any(np.diff(p) <= 0):
            raise CurveError("power samples must be strictly increasing")
        if p[0] <= 0:
            raise CurveError("minimum power must be positive")
        if np.any(h < 0):
            raise CurveError("hydrogen samples must be nonnegative")
        if np.any(np.diff(h) < 0):
            raise CurveError("hydrogen must be nondecreasing in power")
        p.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "hydrogen", h)

    @property
    def p_min(self) -> float:
        return float(self.power[0])

    @property
    def p_max(self) -> float:
        return float(self.power[-1])

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.power.tolist(), self.hydrogen.tolist()))

    @property
    def efficiency(self) -> np.ndarray:
        """Hydrogen per unit power at each sample [kg/MWh]."""
        return self.hydrogen / self.power

    def is_single_peaked(self) -> bool:
        """True when efficiency rises to a unique interior maximum and then falls."""
        eff = self.efficiency
        k = int(np.argmax(eff))
        if k == 0 or k == eff.size - 1:
            return False
        return bool(np.all(np.diff(eff[: k + 1]) > 0) and np.all(np.diff(eff[k:]) < 0))

    def __eq__(self, other):
        if not isinstance(other, TabulatedCurve):
            return NotImplemented
        return np.array_equal(self.power, other.power) and np.array_equal(
            self.hydrogen, other.hydrogen
        )

    def __hash__(self):
        return hash((self.power.tobytes(), self.hydrogen.tobytes()))


@dataclass(frozen=True)
class QuadraticCurve:
    """h(p) = a p^2 + b p + c.

    The exactness proofs write the same coefficients as Q2 (= a),
    Q1 (= b) and Q0 (= c).
    """

    a: float
    b: float
    c: float

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return self.a * p * p + self.b * p + self.c

    @property
    def sign_ok(self) -> bool:
        return self.a < 0 < self.b and self.c < 0

    @property
    def peak_power(self) -> float:
        """Power at which h(p)/p is maximal, sqrt(c/a); nan if undefined."""
        if self.a == 0 or self.c / self.a <= 0:
            return math.nan
        return math.sqrt(self.c / self.a)


@dataclass(frozen=True)
class Segment:
    """Chord h = slope * p + intercept valid on [p_lo, p_hi]."""

    slope: float
    intercept: float
    p_lo: float
    p_hi: float

    def __post_init__(self):
        if not self.p_lo < self.p_hi:
            raise CurveError(f"segment bounds must satisfy p_lo < p_hi, got {self.p_lo}, {self.p_hi}")

    def __call__(self, p):
        return self.slope * np.asarray(p, dtype=float) + self.intercept


@dataclass(frozen=True)
class SegmentSet:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise CurveError("a segment set needs at least one segment")
        for left, right in zip(segs, segs[1:]):
            if left.p_hi != right.p_lo:
                raise CurveError("segments must tile the power range contiguously")
        object.__setattr__(self, "segments", segs)

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, k):
        return self.segments[k]

    @property
    def p_min(self) -> float:
        return self.segments[0].p_lo

    @property
    def p_max(self) -> float:
        return self.segments[-1].p_hi

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([s.p_lo for s in self.segments] + [self.p_max])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([s.slope for s in self.segments])

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([s.intercept for s in self.segments])

    def is_concave(self) -> bool:
        return bool(np.all(np.diff(self.slopes) < 0))

    def __call__(self, p):
        """Piece-wise linear value at ``p`` (the segment containing p)."""
        p = np.asarray(p, dtype=float)
        bp = self.breakpoints
        k = np.clip(np.searchsorted(bp, p, side="right") - 1, 0, len(self.segments) - 1)
        return self.slopes[k] * p + self.intercepts[k]

    def lower_envelope(self, p):
        """min over all segment lines, the bound used by the linear relaxation."""
        p = np.asarray(p, dtype=float)
        return np.min(np.multiply.outer(p, self.slopes) + self.intercepts, axis=-1)


@dataclass(frozen=True)
class QuadraticPiece:
    curve: QuadraticCurve
    p_lo: float
    p_hi: float

    def __iter__(self):
        # unpacks as (curve, p_lo, p_hi)
        return iter((self.curve, self.p_lo, self.p_hi))


def evaluate(curve: TabulatedCurve, p):
    """Linear interpolation of the tabulated curve at ``p``.

    Raises:
        CurveError: if any ``p`` lies outside ``[p_min, p_max]``.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr < curve.p_min) or np.any(arr > curve.p_max) or np.any(np.isnan(arr)):
        raise CurveError(f"power outside curve domain [{curve.p_min}, {curve.p_max}]")
    out = np.interp(arr, curve.power, curve.hydrogen)
    return float(out) if np.ndim(p) == 0 else out


def peak_efficiency(curve: TabulatedCurve) -> tuple[float, float]:
    """Tabulated point of maximal h/p; ties go to the lowest power."""
    eff = curve.efficiency
    best = eff.max()
    k = int(np.flatnonzero(eff >= best - 1e-12 * abs(best))[0])
    return float(curve.power[k]), float(eff[k])


def fit_quadratic(curve: TabulatedCurve, peak_weight: float = DEFAULT_PEAK_WEIGHT) -> QuadraticCurve:
    """Weighted least-squares quadratic through the tabulated samples.

    The sample at peak efficiency gets weight ``peak_weight``, all others
    weight one. A :class:`SignPatternWarning` is emitted when the fit does not
    come out concave with positive slope and negative intercept.
    """
    if peak_weight < 1:
        raise CurveError("peak_weight must be >= 1")
    p, h = curve.power, curve.hydrogen
    if np.unique(p).size < 3:
        raise CurveError("need at least three distinct samples for a quadratic fit")
    w = np.ones_like(p)
    p_star, _ = peak_efficiency(curve)
    w[p == p_star] = peak_weight
    sw = np.sqrt(w)
    V = np.vander(p, 3)
    coef, _, rank, sv = np.linalg.lstsq(V * sw[:, None], h * sw, rcond=None)
    if rank < 3 or sv[-1] <= 1e-12 * sv[0]:
        raise CurveError("singular quadratic fit")
    q = QuadraticCurve(*map(float, coef))
    if not q.sign_ok:
        warnings.warn(f"fitted quadratic {q} violates a<0, b>0, c<0", SignPatternWarning, stacklevel=2)
    return q


def partition_counts(curve: TabulatedCurve, n_segments: int) -> tuple[int, int]:
    """Number of segments left and right of the peak-efficiency power."""
    if n_segments < 2:
        raise CurveError("left/right split needs at least two segments")
    if n_segments in PARTITION_TABLE:
        return PARTITION_TABLE[n_segments]
    p_star, _ = peak_efficiency(curve)
    share = (p_star - curve.p_min) / (curve.p_max - curve.p_min)
    left = min(max(int(round(n_segments * share)), 1), n_segments - 1)
    return left, n_segments - left


def partition_breakpoints(curve: TabulatedCurve, n_segments: int) -> list[float]:
    """Linearization breakpoints, split at peak efficiency and evenly spaced per side."""
    if n_segments < 1:
        raise CurveError("n_segments must be >= 1")
    if n_segments == 1:
        return [curve.p_min, curve.p_max]
    p_star, _ = peak_efficiency(curve)
    if not curve.p_min < p_star < curve.p_max:
        raise CurveError("peak efficiency must lie strictly inside the power range")
    left, right = partition_counts(curve, n_segments)
    lo = np.linspace(curve.p_min, p_star, left + 1)
    hi = np.linspace(p_star, curve.p_max, right + 1)
    # pin the shared breakpoint and endpoints exactly
    lo[0], lo[-1], hi[-1] = curve.p_min, p_star, curve.p_max
    return [float(x) for x in np.concatenate([lo, hi[1:]])]


def linearize(curve: TabulatedCurve, breakpoints: Sequence[float]) -> SegmentSet:
    """Chords of the curve between consecutive breakpoints."""
    bp = np.asarray(breakpoints, dtype=float)
    if bp.size < 2:
        raise CurveError("need at least two breakpoints")
    if np.any(np.diff(bp) == 0):
        raise CurveError("duplicate breakpoints")
    if np.any(np.diff(bp) < 0):
        raise CurveError("breakpoints must be sorted")
    if bp[0] != curve.p_min or bp[-1] != curve.p_max:
        raise CurveError("breakpoints must start at p_min and end at p_max")
    hv = evaluate(curve, bp)
    segs = []
    for k in range(bp.size - 1):
        slope = (hv[k + 1] - hv[k]) / (bp[k + 1] - bp[k])
        segs.append(Segment(float(slope), float(hv[k] - slope * bp[k]), float(bp[k]), float(bp[k + 1])))
    return SegmentSet(tuple(segs))


def _fit_interpolating(p, h, lo, h_lo, hi, h_hi) -> QuadraticCurve:
    # least squares in the coefficients subject to q(lo)=h_lo, q(hi)=h_hi,
    # solved through the KKT system of the equality-constrained problem
    V = np.vander(p, 3)
    E = np.vander(np.array([lo, hi]), 3)
    kkt = np.block([[2 * V.T @ V, E.T], [E, np.zeros((2, 2))]])
    rhs = np.concatenate([2 * V.T @ h, [h_lo, h_hi]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise CurveError("singular constrained quadratic fit") from exc
    return QuadraticCurve(*map(float, sol[:3]))


def quadratic_per_segment(curve: TabulatedCurve, n_segments: int) -> list[QuadraticPiece]:
    """Fit one quadratic per power sub-range.

    Sub-ranges follow :func:`partition_breakpoints`. Each piece interpolates
    the curve at both ends of its sub-range, so neighbouring pieces agree at
    shared breakpoints.
    """
    bp = partition_breakpoints(curve, n_segments)
    pieces = []
    for lo, hi in zip(bp, bp[1:]):
        mask = (curve.power >= lo) & (curve.power <= hi)
        if np.count_nonzero(mask) < 3:
            raise CurveError(f"fewer than three samples in [{lo}, {hi}]")
        q = _fit_interpolating(
            curve.power[mask], curve.hydrogen[mask], lo, evaluate(curve, lo), hi, evaluate(curve, hi)
        )
        pieces.append(QuadraticPiece(q, lo, hi))
    return pieces


def default_curve(
    p_max: float = 1.0,
    p_min_share: float = 0.15,
    peak_share: float = 0.30,
    offset_share: float = 0.05,
    full_load_h2: float = 17.5,
    n_points: int = 86,
) -> TabulatedCurve:
    """Synthetic production curve h(p) = alpha (p - c) / (1 + beta p).

    This is a made-up concave rational curve, not measured data. Its
    efficiency peaks at ``peak_share * p_max`` and it produces
    ``full_load_h2`` kg/h at ``p_max``.
    """
    c = offset_share * p_max
    x = peak_share * p_max
    # efficiency (p - c)/(p (1 + beta p)) is maximal where beta p^2 - 2 beta c p - c = 0
    beta = c / ((x - c) ** 2 - c * c)
    alpha = full_load_h2 * (1 + beta * p_max) / (p_max - c)
    p = np.linspace(p_min_share * p_max, p_max, n_points)
    h = alpha * (p - c) / (1 + beta * p)
    return TabulatedCurve(p, h)


def read_curve_csv(path: str | Path) -> TabulatedCurve:
    """Read a ``power_mw,hydrogen_kg_per_h`` CSV; ``#`` lines are comments."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, line) for i, line in enumerate(fh, start=1) if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise CurveError(f"{path}: empty curve file")
    reader = csv.reader([line for _, line in rows])
    header = next(reader)
    if [c.strip() for c in header] != ["power_mw", "hydrogen_kg_per_h"]:
        raise CurveError(f"{path}:{rows[0][0]}: expected header power_mw,hydrogen_kg_per_h")
    p, h = [], []
    for (lineno, _), rec in zip(rows[1:], reader):
        try:
            if len(rec) != 2:
                raise ValueError
            p.append(float(rec[0]))
            h.append(float(rec[1]))
        except ValueError:
            raise CurveError(f"{path}:{lineno}: malformed row") from None
    return TabulatedCurve(np.array(p), np.array(h))


def write_curve_csv(curve: TabulatedCurve, path: str | Path, comment: str | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("power_mw,hydrogen_kg_per_h\n")
        for p, h in curve.points:
            fh.write(f"{p!r},{h!r}\n")
