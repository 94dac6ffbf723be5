"""Log-domain evaluation of the dataset mixture ``p(z|t)``.

For a finite dataset, ``p(z|t) = (1/N) sum_i N(z; a(t) x_i, b(t)^2 I)``. The
squared distances are expanded as ``|z|^2 - 2 a z.x_i + a^2 |x_i|^2``, so one
pass of ``X @ z`` serves every noise level evaluated for the same ``z``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import logsumexp

from .dataset import Dataset
from .errors import DegenerateNoiseError
from .parallel import row_dot, weighted_row_sum
from .schedules import ScheduleSpec

_T_BLOCK = 128


@dataclasses.dataclass(frozen=True, eq=False)
class Scan:
    """The t-independent part of a full-dataset scan for one ``z``."""

    ds: Dataset
    z: np.ndarray
    dot: np.ndarray  # X @ z
    zz: float

    def log_kernels(self, a, b) -> np.ndarray:
        """``-|z - a x_i|^2 / (2 b^2)`` with shape ``(len(a), N)``."""
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        if np.any(b <= 0):
            raise DegenerateNoiseError("b(t) = 0: p(z|t) is a sum of point masses")
        q = self.zz - 2.0 * a[:, None] * self.dot[None, :] + (a * a)[:, None] * self.ds.sq_norms[None, :]
        np.maximum(q, 0.0, out=q)  # rounding in the expanded form
        return q / (-2.0 * (b * b)[:, None])

    def log_density(self, a, b) -> np.ndarray:
        """``log p(z|t)`` for each ``(a, b)`` pair."""
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        out = np.empty(a.shape)
        for s in range(0, a.size, _T_BLOCK):
            sl = slice(s, s + _T_BLOCK)
            out[sl] = logsumexp(self.log_kernels(a[sl], b[sl]), axis=1)
        return out - 0.5 * self.ds.d * np.log(2.0 * math.pi * b * b) - math.log(self.ds.N)

    def responsibilities(self, a, b) -> np.ndarray:
        """Posterior probabilities of each data point, shape ``(len(a), N)``."""
        lk = self.log_kernels(a, b)
        lk -= lk.max(axis=1, keepdims=True)
        np.exp(lk, out=lk)
        lk /= lk.sum(axis=1, keepdims=True)
        return lk

    def weighted_mean(self, weights: np.ndarray) -> np.ndarray:
        """``weights @ X`` with a deterministic chunked reduction."""
        return weighted_row_sum(weights, self.ds.data)


def scan(ds: Dataset, z) -> Scan:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (ds.d,):
        raise ValueError(f"z has shape {z.shape}, dataset dimension is {ds.d}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    return Scan(ds, z, row_dot(ds.data, z), float(z @ z))


@dataclasses.dataclass(frozen=True, eq=False)
class MixtureEval:
    log_density: float
    log_weights: np.ndarray  # per-point log kernel, unnormalised
    argmax_index: int

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


def _ab(spec: ScheduleSpec, t):
    a, b = spec.coefficients(t)[:2]
    if np.any(np.asarray(b) <= 0):
        raise DegenerateNoiseError(f"b(t) = 0 at t = {t}")
    return a, b


def log_p_z_given_t(z, t, spec: ScheduleSpec, ds: Dataset) -> MixtureEval:
    """``log p(z|t)`` plus the per-point log kernels that make it up."""
    a, b = _ab(spec, t)
    sc = scan(ds, z)
    lk = sc.log_kernels(a, b)[0]
    log_density = logsumexp(lk) - 0.5 * ds.d * math.log(2.0 * math.pi * float(b) ** 2) - math.log(ds.N)
    return MixtureEval(float(log_density), lk, int(np.argmax(lk)))


def posterior_weighted_mean(z, t, spec: ScheduleSpec, ds: Dataset) -> np.ndarray:
    """``E[x | z, t]`` under the empirical data distribution."""
    a, b = _ab(spec, t)
    sc = scan(ds, z)
    return sc.weighted_mean(sc.responsibilities(a, b))[0]
