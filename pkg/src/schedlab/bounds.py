"""Monte Carlo estimates of the per-step constants and the accumulated bound.

If the conditional and unconditional samplers share their initial noise and
per-step noise, their gap obeys

    g_{i+1} <= (kappa_i + |eta_i| L_i) g_i + |eta_i| delta_i,

with ``L_i`` a Lipschitz constant of ``R(.|t_i)`` and ``delta_i`` a bound on
``|R(z|t_i) - R(z)|``. Unrolling gives ``g_N <= sum_i A_i B_i`` with
``A_i = prod_{j>i} (kappa_j + |eta_j| L_j)`` and ``B_i = |eta_i| delta_i``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .dataset import Dataset, noisy_from
from .mixture import scan
from .posterior import PosteriorConfig, posterior_from_scan
from .schedules import SamplerPlan, ScheduleSpec, make_time_grid, sampler_coefficients
from .targets import cond_targets_from_scan, uncond_target_from_posterior

DELTA_STREAM = 0
LIPSCHITZ_STREAM = 1
COLLAPSE_MASS = 0.5  # posterior mass on one grid point above which a step is flagged


def probe_rng(seed: int, step: int, sample: int, stream: int) -> np.random.Generator:
    """Generator for one probe; independent of the order probes are evaluated in."""
    return np.random.default_rng([int(seed), int(step), int(sample), int(stream)])


@dataclasses.dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    max_posterior_mass: float  # largest single-grid-point mass seen across samples


def estimate_delta_detail(t, spec: ScheduleSpec, ds: Dataset, samples: int = 10, seed: int = 0, step: int = 0,
                          config: PosteriorConfig = PosteriorConfig()) -> DeltaEstimate:
    delta, mass = 0.0, 0.0
    for j in range(samples):
        rng = probe_rng(seed, step, j, DELTA_STREAM)
        z = noisy_from(ds, int(rng.integers(ds.N)), t, spec, rng).z
        sc = scan(ds, z)
        post = posterior_from_scan(sc, spec, config)
        r_cond = cond_targets_from_scan(sc, spec, t)[0]
        r_uncond = uncond_target_from_posterior(post, spec)
        delta = max(delta, float(np.linalg.norm(r_cond - r_uncond)))
        mass = max(mass, float(post.probs.max()))
    return DeltaEstimate(delta, mass)


def estimate_delta(t, spec: ScheduleSpec, ds: Dataset, samples: int = 10, seed: int = 0, step: int = 0,
                   config: PosteriorConfig = PosteriorConfig()) -> float:
    """``max_j |R(z_j|t) - R(z_j)|`` over ``samples`` draws ``z_j ~ p(z|t)``."""
    return estimate_delta_detail(t, spec, ds, samples, seed, step, config).delta


def estimate_lipschitz(t, spec: ScheduleSpec, ds: Dataset, probe_eps: float = 0.01, samples: int = 10,
                       seed: int = 0, step: int = 0) -> float:
    """Largest finite-difference slope of ``R(.|t)`` along random directions."""
    if probe_eps <= 0:
        raise ValueError("probe_eps must be positive")
    L = 0.0
    for j in range(samples):
        rng = probe_rng(seed, step, j, LIPSCHITZ_STREAM)
        z = noisy_from(ds, int(rng.integers(ds.N)), t, spec, rng).z
        direction = rng.standard_normal(ds.d)
        z_shift = z + probe_eps * direction
        r0 = cond_targets_from_scan(scan(ds, z), spec, t)[0]
        r1 = cond_targets_from_scan(scan(ds, z_shift), spec, t)[0]
        L = max(L, float(np.linalg.norm(r1 - r0) / np.linalg.norm(z_shift - z)))
    return L


@dataclasses.dataclass(frozen=True, eq=False)
class BoundEstimate:
    family: str
    t: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    L: np.ndarray
    delta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    terms: np.ndarray
    accumulated: float
    truncated: float  # sum with the last ``truncate_last`` steps dropped
    truncate_last: int = 10
    unresolved: Optional[np.ndarray] = None  # steps whose posterior collapsed onto one grid point
    config: dict = dataclasses.field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.t.size

    def step_factors(self) -> np.ndarray:
        return self.kappa + np.abs(self.eta) * self.L

    def rows(self) -> list:
        flags = self.unresolved if self.unresolved is not None else np.zeros(self.N, bool)
        return [
            {
                "i": i, "t": self.t[i], "kappa": self.kappa[i], "eta": self.eta[i], "L": self.L[i],
                "delta": self.delta[i], "A": self.A[i], "B": self.B[i], "AB": self.terms[i],
                "unresolved": bool(flags[i]),
            }
            for i in range(self.N)
        ]


def suffix_products(factors: np.ndarray) -> np.ndarray:
    """``A_i = prod_{j>i} factors_j``; the last entry is the empty product 1."""
    A = np.ones_like(factors)
    for i in range(factors.size - 2, -1, -1):
        A[i] = A[i + 1] * factors[i + 1]
    return A


def accumulate_bound(plan: SamplerPlan, L, delta, truncate_last: int = 10, unresolved=None,
                     config: Optional[dict] = None) -> BoundEstimate:
    L = np.asarray(L, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if L.shape != (plan.N,) or delta.shape != (plan.N,):
        raise ValueError(f"L and delta need {plan.N} entries, got {L.shape} and {delta.shape}")
    if np.any(L < 0) or np.any(delta < 0):
        raise ValueError("L and delta must be non-negative")
    abs_eta = np.abs(plan.eta)
    A = suffix_products(plan.kappa + abs_eta * L)
    B = abs_eta * delta
    terms = A * B
    keep = max(plan.N - truncate_last, 0)
    return BoundEstimate(
        plan.family, plan.times[:-1].copy(), plan.kappa.copy(), plan.eta.copy(), L, delta, A, B, terms,
        math.fsum(terms), math.fsum(terms[:keep]), truncate_last,
        None if unresolved is None else np.asarray(unresolved, bool), dict(config or {}),
    )


def bound_for_plan(plan: SamplerPlan, spec: ScheduleSpec, ds: Dataset, seed: int = 0, samples: int = 10,
                   probe_eps: float = 0.01, config: PosteriorConfig = PosteriorConfig(),
                   truncate_last: int = 10) -> BoundEstimate:
    """Estimate ``delta_i`` and ``L_i`` at every step of ``plan`` and accumulate."""
    L = np.empty(plan.N)
    delta = np.empty(plan.N)
    unresolved = np.zeros(plan.N, bool)
    for i, t in enumerate(plan.times[:-1]):
        det = estimate_delta_detail(t, spec, ds, samples, seed, i, config)
        delta[i] = det.delta
        unresolved[i] = det.max_posterior_mass > COLLAPSE_MASS
        L[i] = estimate_lipschitz(t, spec, ds, probe_eps, samples, seed, i)
    cfg = {"seed": seed, "samples": samples, "probe_eps": probe_eps}
    return accumulate_bound(plan, L, delta, truncate_last, unresolved, cfg)


def bound_pipeline(spec: ScheduleSpec, ds: Dataset, N: int = 100, seed: int = 0, samples: int = 10,
                   probe_eps: float = 0.01, lam: Optional[float] = None,
                   config: PosteriorConfig = PosteriorConfig()) -> BoundEstimate:
    plan = sampler_coefficients(spec, make_time_grid(spec, N), lam)
    return bound_for_plan(plan, spec, ds, seed, samples, probe_eps, config)


@dataclasses.dataclass(frozen=True, eq=False)
class RecursionCheck:
    fraction: float
    violations: list  # step indices where the one-step inequality fails
    lhs: np.ndarray  # g_{i+1}
    rhs: np.ndarray  # (kappa_i + |eta_i| L_i) g_i + |eta_i| delta_i


def verify_step_recursion(gaps, bound: BoundEstimate, rtol: float = 1e-12) -> RecursionCheck:
    """Check the one-step gap inequality along a paired run.

    ``gaps`` holds ``|x_i - x_i'|`` for ``i = 0..N`` (or a ``PairedDivergence``).
    ``rtol`` absorbs rounding when both sides agree to machine precision.
    """
    gaps = np.asarray(getattr(gaps, "gaps", gaps), dtype=np.float64)
    if gaps.shape != (bound.N + 1,):
        raise ValueError(f"expected {bound.N + 1} gaps for {bound.N} steps, got {gaps.shape}")
    lhs = gaps[1:]
    rhs = bound.step_factors() * gaps[:-1] + bound.B
    ok = lhs <= rhs * (1 + rtol)
    return RecursionCheck(float(ok.mean()), [int(i) for i in np.flatnonzero(~ok)], lhs, rhs)
