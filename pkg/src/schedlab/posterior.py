"""The posterior over noise levels, ``p(t|z) ∝ p(t) p(z|t)``.

Evaluation is two-stage: a coarse grid over the whole domain locates the
interval carrying non-negligible mass, and a second uniform grid over that
interval is used for normalisation and moments. Continuous families use the
trapezoidal rule (EDM-type families in ``log t``); discrete families sum over
integer steps exactly.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, noisy_from
from .errors import NoSupportError
from .mixture import Scan, scan
from .schedules import EDM_FAMILIES, ScheduleSpec


@dataclasses.dataclass(frozen=True)
class PosteriorConfig:
    coarse_n: int = 100
    refine_n: int = 100
    drop_nats: float = 40.0  # coarse points this far below the peak are ignored
    pad_cells: int = 1
    single_stage: bool = False  # normalise on the coarse grid itself (faster, less accurate)


@dataclasses.dataclass(frozen=True, eq=False)
class PosteriorEval:
    coarse_grid: np.ndarray
    coarse_log: np.ndarray
    refined_interval: tuple
    refined_grid: np.ndarray
    log_unnorm: np.ndarray  # log p(t) p(z|t) on the refined grid
    density: np.ndarray  # normalised density in the quadrature variable
    quad_weights: np.ndarray
    probs: np.ndarray  # density * quad_weights; sums to 1
    mean_t: float
    var_t: float
    measure: str  # "t", "log_t" or "counting"
    scan: Optional[Scan] = None

    @property
    def weights(self) -> np.ndarray:
        """Normalised density on the refined grid; integrates to 1 under ``quad_weights``."""
        return self.density

    @property
    def std_t(self) -> float:
        return math.sqrt(self.var_t)


def quadrature_variable(spec: ScheduleSpec) -> str:
    if spec.is_discrete:
        return "counting"
    return "log_t" if spec.family in EDM_FAMILIES else "t"


def trapezoid_weights(u: np.ndarray) -> np.ndarray:
    if u.size == 1:
        return np.ones(1)
    du = np.diff(u)
    w = np.zeros_like(u)
    w[:-1] += du / 2
    w[1:] += du / 2
    return w


def log_joint(sc: Scan, spec: ScheduleSpec, t: np.ndarray) -> np.ndarray:
    """``log p(t) + log p(z|t)``; points with ``b(t) = 0`` get ``-inf``."""
    t = np.asarray(t, dtype=np.float64)
    a, b = spec.coefficients(t)[:2]
    a = np.broadcast_to(a, t.shape)
    b = np.broadcast_to(b, t.shape)
    out = np.full(t.shape, -np.inf)
    ok = b > 0
    if np.any(ok):
        out[ok] = spec.log_prior(t[ok]) + sc.log_density(a[ok], b[ok])
    return out


def _uniform_grid(spec: ScheduleSpec, lo: float, hi: float, n: int) -> np.ndarray:
    if spec.is_discrete:
        return np.unique(np.rint(np.linspace(lo, hi, n)))
    if quadrature_variable(spec) == "log_t":
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _quad_var(spec, t):
    return np.log(t) if quadrature_variable(spec) == "log_t" else t


def _normalise(spec, t, logf, sc, coarse_grid, coarse_log, interval):
    measure = quadrature_variable(spec)
    peak = np.max(logf)
    if not np.isfinite(peak):
        raise NoSupportError("p(t|z) has no support on the refined grid")
    f = np.exp(logf - peak)
    w = np.ones_like(t) if measure == "counting" else trapezoid_weights(_quad_var(spec, t))
    Z = float(np.sum(w * f))
    density = f / Z
    probs = density * w
    mean = float(np.sum(probs * t))
    var = float(np.sum(probs * (t - mean) ** 2))
    return PosteriorEval(
        coarse_grid, coarse_log, interval, t, logf, density, w, probs, mean, var, measure, sc
    )


def posterior_from_scan(sc: Scan, spec: ScheduleSpec, config: PosteriorConfig = PosteriorConfig()) -> PosteriorEval:
    lo, hi = spec.posterior_domain
    coarse = _uniform_grid(spec, lo, hi, config.coarse_n)
    coarse_log = log_joint(sc, spec, coarse)
    peak = np.max(coarse_log)
    if not np.isfinite(peak):
        raise NoSupportError("p(t) p(z|t) vanishes at every coarse grid point")
    if config.refine_n == 1:
        t = coarse[[int(np.argmax(coarse_log))]]
        interval = (float(t[0]), float(t[0]))
        return _normalise(spec, t, coarse_log[[int(np.argmax(coarse_log))]], sc, coarse, coarse_log, interval)
    if config.single_stage:
        return _normalise(spec, coarse, coarse_log, sc, coarse, coarse_log, (float(coarse[0]), float(coarse[-1])))
    keep = np.flatnonzero(coarse_log >= peak - config.drop_nats)
    first = max(int(keep[0]) - config.pad_cells, 0)
    last = min(int(keep[-1]) + config.pad_cells, coarse.size - 1)
    l, r = float(coarse[first]), float(coarse[last])
    if spec.is_discrete:
        t = np.arange(l, r + 1.0)
    else:
        t = _uniform_grid(spec, l, r, config.refine_n)
    return _normalise(spec, t, log_joint(sc, spec, t), sc, coarse, coarse_log, (l, r))


def posterior_grid(z, spec: ScheduleSpec, ds: Dataset, config: PosteriorConfig = PosteriorConfig()) -> PosteriorEval:
    """Two-stage grid evaluation of ``p(t|z)`` with its mean and variance."""
    return posterior_from_scan(scan(ds, z), spec, config)


def brute_force_posterior(z, spec: ScheduleSpec, ds: Dataset, n_points: int = 100_000):
    """Mean and variance of ``p(t|z)`` from one dense trapezoidal grid over the domain.

    Discrete families are summed over every step ``1..T``.
    """
    if n_points < 1000:
        raise ValueError("the dense oracle needs at least 1000 points")
    sc = scan(ds, z)
    lo, hi = spec.posterior_domain
    if spec.is_discrete:
        t = np.arange(lo, hi + 1.0)
    else:
        t = _uniform_grid(spec, lo, hi, n_points)
    logf = np.concatenate([log_joint(sc, spec, t[s : s + 4096]) for s in range(0, t.size, 4096)])
    peak = np.max(logf)
    if not np.isfinite(peak):
        raise NoSupportError("p(t) p(z|t) vanishes on the dense grid")
    f = np.exp(logf - peak)
    if not spec.is_discrete:
        f = f * trapezoid_weights(_quad_var(spec, t))
    p = f / f.sum()
    mean = float(p @ t)
    return mean, float(p @ (t - mean) ** 2)


def sample_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator keyed by ``(seed, *keys)``, independent of evaluation order."""
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


@dataclasses.dataclass
class Profile:
    rows: list  # dicts: tstar, sample_idx, mean_t, var_t
    summary: list  # dicts: tstar, var_mean, var_stderr, estimate


def posterior_profile(
    ds: Dataset,
    spec: ScheduleSpec,
    tstars: Sequence[float],
    samples_per_level: int = 25,
    seed: int = 0,
    config: PosteriorConfig = PosteriorConfig(),
) -> Profile:
    """Average posterior variance of ``t`` for noisy points drawn at each ``t*``.

    ``estimate`` is ``t*^2 / 2d``, the single-point flow-matching approximation.
    """
    rows, summary = [], []
    for k, tstar in enumerate(tstars):
        vs = []
        for j in range(samples_per_level):
            rng = sample_rng(seed, k, j)
            point = noisy_from(ds, int(rng.integers(ds.N)), tstar, spec, rng)
            post = posterior_grid(point.z, spec, ds, config)
            rows.append({"tstar": tstar, "sample_idx": j, "mean_t": post.mean_t, "var_t": post.var_t})
            vs.append(post.var_t)
        vs = np.asarray(vs)
        summary.append(
            {
                "tstar": tstar,
                "var_mean": float(vs.mean()),
                "var_stderr": float(vs.std(ddof=1) / math.sqrt(vs.size)) if vs.size > 1 else 0.0,
                "estimate": tstar**2 / (2 * ds.d),
            }
        )
    return Profile(rows, summary)
