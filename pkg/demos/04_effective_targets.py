"""Conditional vs unconditional effective targets and their gap.

The gap E(z) stays tiny relative to |R(z)|^2 once the posterior is sharp.
"""

from schedlab.dataset import corrupt, synth_points
from schedlab.schedules import ScheduleSpec
from schedlab.targets import target_gap

fm = ScheduleSpec("fm")
ds = synth_points(200, 1024, seed=0)
for tstar in (0.1, 0.3, 0.5, 0.7, 0.9):
    z = corrupt(ds, 0, tstar, fm, seed=[7, int(tstar * 10)]).z
    ev = target_gap(z, fm, ds)
    print(f"t*={tstar}: E={ev.gap:.4f} |R|^2={ev.norm_sq:.1f} E/|R|^2={ev.relative_gap:.2e} "
          f"posterior mean t={ev.posterior.mean_t:.4f}")
