# %%
"""When is the convex relaxation exact?

Three days: a loose cap, a binding cap with positive prices, and a day whose
cap can be met in negative-price hours alone. Only the last one can show a
gap, and ``apriori_check`` flags it before solving.
"""

import numpy as np

from h2sched.analysis import apriori_check, classify_exactness
from h2sched.curve import default_curve, fit_quadratic
from h2sched.model import DemandSpec, MarketSeries, PlantConfig, build, solve

curve = default_curve()
q = fit_quadratic(curve)
plant = PlantConfig()
full = float(curve.hydrogen[-1])
t = np.arange(24)

days = {
    "loose cap": (MarketSeries(30 + 10 * np.sin(t / 4), np.full(24, 1.5)), 10 * 24 * full),
    "binding cap": (MarketSeries(5 + 0.5 * t, np.full(24, 1.5)), 6 * full),
    "negative block": (MarketSeries(np.where(t < 18, -10 - 0.2 * t, 40 + 0.5 * t), np.full(24, 2.0)), 9 * full),
}

# %%
for name, (series, cap) in days.items():
    demand = DemandSpec.default(24, cap)
    sol = solve(build(plant, series, demand, "soc", q))
    rep = classify_exactness(sol)
    flag = apriori_check(series, demand, q, plant)[0]
    print(f"{name:>15}: label {rep.classification[0]:<20} observed {rep.observed[0]:<16} "
          f"gap {max(0.0, rep.period_gaps.sum()):8.3f} kg  apriori {flag}")
