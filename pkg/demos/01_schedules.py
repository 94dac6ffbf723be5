"""Training schedules and sampler coefficients for each family.

Prints a(t), b(t), c(t), d(t), w(t) at a few noise levels, then the first
sampler steps of each family and the DDIM lambda interpolation.
"""

import numpy as np

from schedlab.schedules import ScheduleSpec, make_time_grid, sampler_coefficients

for family in ("fm", "edm", "uedm", "ddim", "iddpm"):
    spec = ScheduleSpec(family)
    t = {"fm": 0.5, "edm": 1.0, "uedm": 1.0, "ddim": 500, "iddpm": 2000}[family]
    a, b, c, d, w = (float(v) for v in spec.coefficients(t))
    print(f"{family:6s} t={t:<6} a={a:.4f} b={b:.4f} c={c:.4f} d={d:.4f} w={w:.4f}")

print("\nfirst three steps, N=10")
for family in ("fm", "edm", "uedm", "ddim"):
    spec = ScheduleSpec(family)
    plan = sampler_coefficients(spec, make_time_grid(spec, 10))
    print(f"{family:6s} times={np.round(plan.times[:3], 4)} kappa={np.round(plan.kappa[:3], 4)} "
          f"eta={np.round(plan.eta[:3], 4)}")

spec = ScheduleSpec("ddim")
grid = make_time_grid(spec, 10)
for lam in (0.0, 0.5, 1.0):
    plan = sampler_coefficients(spec, grid, lam)
    print(f"ddim lambda={lam}: zeta[:3]={np.round(plan.zeta[:3], 4)}")
