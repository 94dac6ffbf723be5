"""Datasets: synthetic generators, raw tensor round trip, and corruption.

Pass a CIFAR-10 binary directory as the first argument to load it too.
"""

import sys
import tempfile
from pathlib import Path

from schedlab.dataset import corrupt, dataset_stats, load_cifar10, load_raw_tensor, save_raw_tensor, synth_points
from schedlab.schedules import ScheduleSpec

ds = synth_points(1000, 64, seed=0)
print("synthetic uniform:", ds.N, "x", ds.d, "sigma_d =", round(dataset_stats(ds).sigma_d, 4))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "x.f32"
    save_raw_tensor(path, ds.data, "unit_range")
    back = load_raw_tensor(path)
    print("raw round trip max abs diff:", float(abs(back.data - ds.data).max()))

p = corrupt(ds, 3, 0.4, ScheduleSpec("fm"), seed=1)
print("corrupted point reconstructs bitwise:", (p.reconstruct(ds, ScheduleSpec("fm")) == p.z).all())

if len(sys.argv) > 1:
    cifar = load_cifar10(sys.argv[1])
    print("CIFAR-10:", cifar.N, "x", cifar.d, "sigma_d =", dataset_stats(cifar).sigma_d)
