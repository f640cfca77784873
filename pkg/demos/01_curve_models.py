# %%
"""Fit the electrolyzer curve and compare the four curve models on one day.

Run with ``python3 demos/01_curve_models.py``.
"""

import numpy as np

from h2sched.analysis import curve_data_for, expost, relaxation_gap
from h2sched.curve import default_curve, fit_quadratic, partition_counts, peak_efficiency
from h2sched.data import synthetic_market
from h2sched.model import DemandSpec, PlantConfig, build, full_load_demand, solve

# %% The tabulated curve, its quadratic fit and the peak-efficiency point
curve = default_curve()
q = fit_quadratic(curve)
p_star, eta = peak_efficiency(curve)
print(f"quadratic fit: a={q.a:.3f} b={q.b:.3f} c={q.c:.3f}")
print(f"peak efficiency {eta:.2f} kg/MWh at {p_star:.3f} MW")
for n in (1, 2, 10, 24):
    print(f"{n:>2} segments -> left/right of peak {partition_counts(curve, n) if n > 1 else (1, 0)}")

# %% One synthetic day, a daily cap at 60% of full-load output
plant = PlantConfig()
market = synthetic_market(24, seed=4)
demand = DemandSpec.default(24, 0.6 * full_load_demand(curve))

# %% Solve each model and score its dispatch on the tabulated curve
ref = None
for model in ("mil24", "mil2", "l10", "soc", "misoc2"):
    kind = model.rstrip("0123456789")
    digits = model[len(kind):]
    data = curve_data_for(kind, int(digits) if digits else None, curve)
    sol = solve(build(plant, market, demand, kind, data))
    ref = sol if ref is None else ref
    post = expost(sol, curve, plant, benchmark=ref)
    print(
        f"{model:>7}: objective {sol.objective:9.2f}  hydrogen {post.hydrogen_kg:7.2f} kg  "
        f"delta vs mil24 {post.deltas['hydrogen_kg']:+7.3f} kg  max gap {relaxation_gap(sol).max_gap:.1e}"
    )

# %% Hourly dispatch of the benchmark
print("hour  price   wind  p_mw   state")
for t in range(24):
    print(f"{t:>4} {market.lam[t]:6.1f} {market.wind[t]:6.2f} {ref.p[t]:6.3f}  {ref.state[t]}")
print("total electrolyzer energy", np.round(ref.p.sum(), 3), "MWh")
