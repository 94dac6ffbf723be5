"""Oracle sampling with and without noise conditioning on a two-point toy.

Both samplers use the same seed; the printout shows where each lands and
how far apart the trajectories drift.
"""

import numpy as np

from schedlab.dataset import Dataset
from schedlab.sampler import paired_divergence
from schedlab.schedules import ScheduleSpec, make_time_grid, sampler_coefficients

toy = Dataset(np.array([[0.5, 0.5], [-0.5, -0.5]]))
for family in ("fm", "edm", "uedm", "ddim"):
    spec = ScheduleSpec(family)
    plan = sampler_coefficients(spec, make_time_grid(spec, 50))
    for seed in range(3):
        pd = paired_divergence(plan, spec, toy, seed)
        print(f"{family:5s} seed={seed} cond={np.round(pd.conditional.x_final, 3)} "
              f"uncond={np.round(pd.unconditional.x_final, 3)} max gap={pd.gaps.max():.3f}")
