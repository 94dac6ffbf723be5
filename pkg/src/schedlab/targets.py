"""Effective regression targets with and without the noise level.

With the noise level known, the optimal output is

    R(z|t) = (d/b) z + (c - a d / b) E[x | z, t].

Without it, the optimal output averages over the posterior of ``t``:
``R(z) = sum_k p_k R(z|t_k)`` on the refined posterior grid, and the gap
``E(z) = sum_k p_k |R(z|t_k) - R(z)|^2`` measures how much is lost.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .dataset import Dataset
from .errors import DegenerateNoiseError
from .mixture import Scan, scan
from .parallel import pairwise_sum
from .posterior import PosteriorConfig, PosteriorEval, posterior_from_scan
from .schedules import ScheduleSpec

_T_BLOCK = 128


def _target_coefficients(spec: ScheduleSpec, t):
    """Per-t ``(d/b, c - a d/b, a, b)`` as 1-d arrays."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    a, b, c, d, _ = (np.broadcast_to(v, t.shape) for v in spec.coefficients(t))
    if np.any(b <= 0):
        raise DegenerateNoiseError("b(t) = 0: the effective target divides by b(t)")
    z_coef = d / b
    return z_coef, c - a * z_coef, a, b


def _point_weights(sc: Scan, x_coef, a, b, scale=None) -> np.ndarray:
    """Rows ``scale_k * x_coef_k * softmax_k``; their product with X gives the data part of R."""
    resp = sc.responsibilities(a, b)
    f = x_coef if scale is None else scale * x_coef
    resp *= f[:, None]
    return resp


def cond_targets_from_scan(sc: Scan, spec: ScheduleSpec, t) -> np.ndarray:
    """``R(z|t_k)`` for every ``t_k``, shape ``(K, d)``."""
    z_coef, x_coef, a, b = _target_coefficients(spec, t)
    out = np.empty((z_coef.size, sc.ds.d))
    for s in range(0, z_coef.size, _T_BLOCK):
        sl = slice(s, s + _T_BLOCK)
        out[sl] = z_coef[sl, None] * sc.z[None, :] + sc.weighted_mean(_point_weights(sc, x_coef[sl], a[sl], b[sl]))
    return out


def effective_target_cond(z, t, spec: ScheduleSpec, ds: Dataset) -> np.ndarray:
    """``R(z|t)`` for a single noise level."""
    return cond_targets_from_scan(scan(ds, z), spec, t)[0]


def uncond_target_from_posterior(post: PosteriorEval, spec: ScheduleSpec) -> np.ndarray:
    """``sum_k p_k R(z|t_k)`` using one combined weight vector over data points."""
    sc = post.scan
    live = post.probs > 0
    t, p = post.refined_grid[live], post.probs[live]
    z_coef, x_coef, a, b = _target_coefficients(spec, t)
    parts = []
    for s in range(0, t.size, _T_BLOCK):
        sl = slice(s, s + _T_BLOCK)
        parts.append(_point_weights(sc, x_coef[sl], a[sl], b[sl], p[sl]).sum(axis=0))
    w = pairwise_sum(parts)
    return float(np.sum(p * z_coef)) * sc.z + sc.weighted_mean(w)[0]


def effective_target_uncond(z, spec: ScheduleSpec, ds: Dataset, posterior: Optional[PosteriorEval] = None,
                            config: PosteriorConfig = PosteriorConfig()) -> np.ndarray:
    """``R(z)``, the posterior average of ``R(z|t)`` over the refined grid.

    A supplied ``posterior`` must belong to the same ``z``; its dataset scan is
    reused.
    """
    if posterior is None:
        posterior = posterior_from_scan(scan(ds, z), spec, config)
    elif posterior.scan is None or not np.array_equal(posterior.scan.z, np.asarray(z, dtype=np.float64)):
        raise ValueError("posterior was computed for a different z")
    return uncond_target_from_posterior(posterior, spec)


@dataclasses.dataclass(frozen=True, eq=False)
class EffectiveTargetEval:
    r_cond: np.ndarray  # (K, d): R(z|t_k) on grid points with positive posterior mass
    t_cond: np.ndarray
    r_uncond: np.ndarray
    gap: float  # sum_k p_k |R_k - R|^2
    gap_moments: float  # sum_k p_k |R_k|^2 - |R|^2, the same quantity by expansion
    norm_sq: float  # |R(z)|^2
    posterior: PosteriorEval

    @property
    def relative_gap(self) -> float:
        return self.gap / self.norm_sq if self.norm_sq > 0 else float("inf")


def target_gap_from_posterior(post: PosteriorEval, spec: ScheduleSpec) -> EffectiveTargetEval:
    live = post.probs > 0
    t, p = post.refined_grid[live], post.probs[live]
    p = p / p.sum()
    r = cond_targets_from_scan(post.scan, spec, t)
    r_bar = p @ r
    diff = r - r_bar
    gap = float(p @ np.einsum("kd,kd->k", diff, diff))
    second = float(p @ np.einsum("kd,kd->k", r, r))
    norm_sq = float(r_bar @ r_bar)
    return EffectiveTargetEval(r, t, r_bar, gap, second - norm_sq, norm_sq, post)


def target_gap(z, spec: ScheduleSpec, ds: Dataset, config: PosteriorConfig = PosteriorConfig()) -> EffectiveTargetEval:
    """Posterior, conditional targets on its grid, ``R(z)`` and the gap ``E(z)``."""
    return target_gap_from_posterior(posterior_from_scan(scan(ds, z), spec, config), spec)
