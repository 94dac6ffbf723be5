"""Finite datasets, loaders and noisy-point construction.

A dataset is an ``N x d`` float64 matrix; the empirical distribution puts mass
``1/N`` on each row.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import MalformedFileError
from .schedules import ScheduleSpec

NORMALIZATIONS = ("unit_range", "edm_scaled", "none")

CIFAR_RECORD = 3073
CIFAR_PIXELS = 3072


@dataclasses.dataclass(frozen=True, eq=False)
class Dataset:
    data: np.ndarray
    normalization: str = "none"

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data is self.data and data.flags.writeable:
            data = data.copy()
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"dataset must be a non-empty N x d matrix, got shape {data.shape}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        bad = np.flatnonzero(~np.isfinite(data.ravel()))
        if bad.size:
            row, col = divmod(int(bad[0]), data.shape[1])
            raise ValueError(f"non-finite entry at row {row}, column {col}")
        limit = {"unit_range": 1.0, "edm_scaled": 0.5}.get(self.normalization)
        if limit is not None and max(data.max(), -data.min()) > limit:
            raise ValueError(f"{self.normalization} entries must lie in [-{limit}, {limit}]")
        data.setflags(write=False)
        sq = np.einsum("ij,ij->i", data, data)
        sq.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sq_norms", sq)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.N


@dataclasses.dataclass(frozen=True)
class DatasetStats:
    sigma_d: float  # RMS of all entries
    mean: float
    d: int
    N: int


def dataset_stats(ds: Dataset) -> DatasetStats:
    """Per-entry statistics; ``sigma_d`` is the uncentred root mean square."""
    total = ds.N * ds.d
    sigma_d = float(np.sqrt(ds.sq_norms.sum() / total))
    return DatasetStats(sigma_d=sigma_d, mean=float(ds.data.mean()), d=ds.d, N=ds.N)


def _pixels_to(normalization: str, pixels: np.ndarray, out: np.ndarray) -> None:
    out[...] = pixels
    out /= 127.5
    out -= 1.0
    if normalization == "edm_scaled":
        out *= 0.5


def find_cifar10_batches(path: Union[str, os.PathLike]) -> list[Path]:
    """The five training batches in a CIFAR-10 binary directory."""
    path = Path(path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"no CIFAR-10 data at {path}")
    for root in (path, path / "cifar-10-batches-bin"):
        files = sorted(root.glob("data_batch_*.bin"))
        if files:
            return files
    raise FileNotFoundError(f"no data_batch_*.bin files under {path}")


def load_cifar10(paths: Union[str, os.PathLike, Sequence], normalization: str = "unit_range") -> Dataset:
    """Load CIFAR-10 binary batches, discarding labels.

    ``paths`` is a directory (the five training batches are used) or an
    explicit list of batch files.
    """
    if normalization not in ("unit_range", "edm_scaled"):
        raise ValueError("CIFAR-10 pixels need normalization 'unit_range' or 'edm_scaled'")
    if isinstance(paths, (str, os.PathLike)):
        paths = find_cifar10_batches(paths)
    sizes = []
    for p in paths:
        size = Path(p).stat().st_size
        if size == 0 or size % CIFAR_RECORD:
            raise MalformedFileError(f"{p}: length {size} is not a multiple of {CIFAR_RECORD}")
        sizes.append(size // CIFAR_RECORD)
    data = np.empty((sum(sizes), CIFAR_PIXELS))
    row = 0
    for p, n in zip(paths, sizes):
        records = np.frombuffer(Path(p).read_bytes(), dtype=np.uint8).reshape(n, CIFAR_RECORD)
        _pixels_to(normalization, records[:, 1:], data[row : row + n])
        row += n
    data.setflags(write=False)  # hand over without a defensive copy
    return Dataset(data, normalization)


def load_raw_tensor(path, meta: Optional[dict] = None, normalization: Optional[str] = None) -> Dataset:
    """Load a row-major little-endian float32 ``N x d`` tensor.

    ``meta`` holds ``N`` and ``d`` (and optionally the stored ``normalization``);
    when omitted it is read from the ``<path>.json`` sidecar. Asking for
    ``edm_scaled`` on data stored as ``unit_range`` halves the entries.
    """
    path = Path(path)
    if meta is None:
        meta = json.loads(Path(str(path) + ".json").read_text())
    n, d = int(meta["N"]), int(meta["d"])
    dtype = np.dtype(meta.get("dtype", "<f4")).newbyteorder("<")
    stored = meta.get("normalization", "none")
    raw = path.read_bytes()
    expected = n * d * dtype.itemsize
    if len(raw) != expected:
        raise MalformedFileError(f"{path}: expected {expected} bytes for {n}x{d}, found {len(raw)}")
    data = np.frombuffer(raw, dtype=dtype).reshape(n, d).astype(np.float64)
    target = normalization or stored
    if target != stored:
        if (stored, target) != ("unit_range", "edm_scaled"):
            raise ValueError(f"cannot convert {stored} data to {target}")
        data = data * 0.5
    return Dataset(data, target)


def save_raw_tensor(path, data: np.ndarray, normalization: str = "none") -> None:
    """Write ``data`` in the raw tensor format with its JSON sidecar."""
    data = np.atleast_2d(np.asarray(data))
    Path(path).write_bytes(data.astype("<f4").tobytes(order="C"))
    meta = {"N": data.shape[0], "d": data.shape[1], "dtype": "<f4", "normalization": normalization}
    Path(str(path) + ".json").write_text(json.dumps(meta))


def synth_single_point(d: int, fill: Union[float, str] = 0.0, seed: int = 0) -> Dataset:
    """One data point: a constant vector, or uniform [-1, 1] draws for ``fill='uniform_pm1'``."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if fill == "uniform_pm1":
        x = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(1, d))
    else:
        x = np.full((1, d), float(fill))
    norm = "unit_range" if np.abs(x).max() <= 1 else "none"
    return Dataset(x, norm)


def synth_points(N: int, d: int, distribution: str = "uniform_pm1", sigma: float = 1.0, seed: int = 0) -> Dataset:
    """``N`` i.i.d. points, uniform on [-1, 1]^d or Gaussian with std ``sigma``."""
    if d < 1 or N < 1:
        raise ValueError("N and d must be at least 1")
    rng = np.random.default_rng(seed)
    if distribution == "uniform_pm1":
        return Dataset(rng.uniform(-1.0, 1.0, size=(N, d)), "unit_range")
    if distribution == "gaussian":
        return Dataset(rng.normal(0.0, sigma, size=(N, d)), "none")
    raise ValueError(f"unknown distribution {distribution!r}")


@dataclasses.dataclass(frozen=True, eq=False)
class NoisyPoint:
    z: np.ndarray
    t_star: Optional[float] = None
    index: Optional[int] = None
    eps: Optional[np.ndarray] = None

    def reconstruct(self, ds: Dataset, spec: ScheduleSpec) -> np.ndarray:
        a, b = spec.coefficients(self.t_star)[:2]
        return a * ds.data[self.index] + b * self.eps


def noisy_from(ds: Dataset, index: int, t_star: float, spec: ScheduleSpec, rng: np.random.Generator) -> NoisyPoint:
    if not 0 <= index < ds.N:
        raise IndexError(f"index {index} out of range for {ds.N} points")
    a, b = spec.coefficients(t_star)[:2]
    eps = rng.standard_normal(ds.d)
    return NoisyPoint(a * ds.data[index] + b * eps, float(t_star), int(index), eps)


def corrupt(ds: Dataset, index: int, t_star: float, spec: ScheduleSpec, seed) -> NoisyPoint:
    """``z = a(t*) x_index + b(t*) eps`` with seeded standard-normal ``eps``."""
    return noisy_from(ds, index, t_star, spec, np.random.default_rng(seed))
