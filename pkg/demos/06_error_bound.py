"""Accumulated error bound per family, compared with the observed gap.

The bound is a sum of per-step terms A_i B_i built from Monte Carlo
estimates of the target gap and Lipschitz constant.
"""

import numpy as np

from schedlab.bounds import bound_for_plan
from schedlab.dataset import Dataset
from schedlab.sampler import paired_divergence
from schedlab.schedules import ScheduleSpec, make_time_grid, sampler_coefficients

toy = Dataset(np.array([[0.5, 0.5], [-0.5, -0.5]]))
for family in ("fm", "uedm", "edm", "ddim"):
    spec = ScheduleSpec(family)
    plan = sampler_coefficients(spec, make_time_grid(spec, 25))
    bound = bound_for_plan(plan, spec, toy, seed=0, samples=5)
    gap = paired_divergence(plan, spec, toy, 0).final_gap
    print(f"{family:5s} bound={bound.accumulated:.3e} without last 10 steps={bound.truncated:.3e} "
          f"observed final gap={gap:.3e}")
