"""Independent reference computations for the test suite.

Each oracle avoids the library's own numerics (no np.interp, no lstsq, no
backends), so agreement is evidence rather than tautology. ``freeze.py``
stores their outputs in ``frozen.json``; tests compare the library against
the stored values and check that the oracles still reproduce them.
"""

from __future__ import annotations

import bisect
import itertools
import math


def interp(ps, hs, x):
    """Piece-wise linear interpolation by bisection on sorted samples."""
    k = bisect.bisect_right(ps, x) - 1
    k = min(max(k, 0), len(ps) - 2)
    t = (x - ps[k]) / (ps[k + 1] - ps[k])
    return hs[k] + t * (hs[k + 1] - hs[k])


def peak_scan(ps, hs):
    """Sample with the largest h/p, lowest power on ties."""
    best, arg = -math.inf, None
    for p, h in zip(ps, hs):
        if h / p > best:
            best, arg = h / p, p
    return arg, best


def _solve3(M, v):
    """Cramer's rule for a 3x3 system."""

    def det(A):
        return (
            A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1])
            - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0])
            + A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0])
        )

    d = det(M)
    out = []
    for c in range(3):
        A = [row[:] for row in M]
        for r in range(3):
            A[r][c] = v[r]
        out.append(det(A) / d)
    return out


def lsq_quadratic(ps, hs, weights=None):
    """Weighted least squares a p^2 + b p + c via the normal equations."""
    w = [1.0] * len(ps) if weights is None else list(weights)
    # centre and scale for conditioning, then map back
    m = sum(ps) / len(ps)
    s = max(abs(p - m) for p in ps)
    xs = [(p - m) / s for p in ps]
    S = [[0.0] * 3 for _ in range(3)]
    v = [0.0] * 3
    for x, h, wi in zip(xs, hs, w):
        basis = (x * x, x, 1.0)
        for i in range(3):
            v[i] += wi * basis[i] * h
            for j in range(3):
                S[i][j] += wi * basis[i] * basis[j]
    A, B, C = _solve3(S, v)
    # A x^2 + B x + C with x = (p - m)/s
    a = A / s**2
    b = -2 * A * m / s**2 + B / s
    c = A * m * m / s**2 - B * m / s + C
    return a, b, c


def endpoint_lsq_quadratic(ps, hs, lo, h_lo, hi, h_hi):
    """Least squares over quadratics through (lo, h_lo) and (hi, h_hi).

    Every such quadratic is chord(p) + k (p - lo)(p - hi), so the fit is a
    one-dimensional least squares problem in k.
    """
    slope = (h_hi - h_lo) / (hi - lo)
    num = den = 0.0
    for p, h in zip(ps, hs):
        g = (p - lo) * (p - hi)
        num += (h - (h_lo + slope * (p - lo))) * g
        den += g * g
    k = num / den
    a = k
    b = slope - k * (lo + hi)
    c = h_lo - slope * lo + k * lo * hi
    return a, b, c


def chords(ps, hs, breakpoints):
    out = []
    for lo, hi in zip(breakpoints, breakpoints[1:]):
        y0, y1 = interp(ps, hs, lo), interp(ps, hs, hi)
        slope = (y1 - y0) / (hi - lo)
        out.append((slope, y0 - slope * lo, lo, hi))
    return out


def gamma_bar(p, ref, eps=1e-6):
    """Hand rule: relative difference where the reference runs, summed / T."""
    total, used = 0.0, 0
    excluded = []
    for t, (x, r) in enumerate(zip(p, ref)):
        if r > eps:
            total += abs((x - r) / r)
            used += 1
        else:
            excluded.append(t)
    return total / len(p), (total / used if used else 0.0), excluded


def cap_sum(lam, wind, demand, a, b, c, p_max, p_min):
    """Max output over non-positive-price hours compared with the cap."""
    tot = 0.0
    for l, w in zip(lam, wind):
        if l <= 0:
            pb = min(w, p_max)
            if pb >= p_min:
                tot += max(a * pb * pb + b * pb + c, 0.0)
    return tot, tot >= demand


def two_hour_negative_price(lam, wind, chi, k_su, p_max, p_min, p_sb, h_of):
    """Brute force over the 3^2 state sequences of a two-hour day.

    Power in the on state is scanned on a fine grid; wind sales are
    ``W - p``. Returns the best profit and (state, power) per hour.
    """
    grid = [p_min + (p_max - p_min) * i / 2000 for i in range(2001)]
    best = (-math.inf, None)
    for states in itertools.product(("on", "sb", "off"), repeat=2):
        opts = []
        for t, st in enumerate(states):
            if st == "on":
                cand = [(lam[t] * (wind[t] - p) + chi * h_of(p), p) for p in grid if p <= wind[t]]
            elif st == "sb":
                cand = [(lam[t] * (wind[t] - p_sb), p_sb)] if p_sb <= wind[t] else []
            else:
                cand = [(lam[t] * wind[t], 0.0)]
            if not cand:
                break
            opts.append(max(cand))
        else:
            # startup only when leaving the off state; hour one starts warm
            su = k_su if states[0] == "off" and states[1] != "off" else 0.0
            val = sum(o[0] for o in opts) - su
            if val > best[0]:
                best = (val, [(st, o[1]) for st, o in zip(states, opts)])
    return best
