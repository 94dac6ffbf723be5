"""The noise level posterior p(t|z) narrows as dimension grows.

For single-point data the variance should track t*^2 / 2d.
"""

from schedlab.dataset import synth_single_point
from schedlab.posterior import posterior_profile
from schedlab.schedules import ScheduleSpec
from schedlab.theory import variance_estimate

fm = ScheduleSpec("fm")
for d in (16, 256, 4096):
    ds = synth_single_point(d, "uniform_pm1", seed=0)
    prof = posterior_profile(ds, fm, [0.2, 0.5, 0.8], samples_per_level=20, seed=0)
    for row in prof.summary:
        est = variance_estimate(row["tstar"], d)
        print(f"d={d:5d} t*={row['tstar']}: var={row['var_mean']:.3e} estimate={est:.3e} "
              f"ratio={row['var_mean'] / est:.3f}")
