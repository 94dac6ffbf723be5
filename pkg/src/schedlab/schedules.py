"""Schedule families written in one shared notation.

Every family is described by the corruption ``z = a(t) x + b(t) eps``, the
regression target ``r = c(t) x + d(t) eps`` with loss weight ``w(t)``, a time
prior ``p(t)``, and a first-order sampler

    x_{i+1} = kappa_i x_i + eta_i NN(x_i | t_i) + zeta_i eps_i.

Supported families: ``iddpm`` (cosine alpha-bar), ``ddim`` (linear beta
product), ``edm``, ``fm`` (flow matching) and ``uedm`` (EDM with a constant
output scale).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

FAMILIES = ("iddpm", "ddim", "edm", "fm", "uedm")
DISCRETE_FAMILIES = ("iddpm", "ddim")
EDM_FAMILIES = ("edm", "uedm")

_DEFAULT_T = {"iddpm": 4000, "ddim": 1000}


@dataclasses.dataclass(frozen=True)
class ScheduleSpec:
    """A schedule family plus its scalar parameters.

    Unused parameters are ignored by families that do not need them, so one
    record type covers every family. ``T`` defaults to 4000 for iDDPM and
    1000 for DDIM.
    """

    family: str
    T: Optional[int] = None
    k1: float = 1e-4
    k2: float = 2e-2
    sigma_d: float = 0.5
    rho: float = 7.0
    t_min: float = 0.002
    t_max: float = 80.0
    prior_mean: float = -1.2
    prior_std: float = 1.2
    # "zero_end": (N-1) denominator with t_N = 0; "tmin_end": N denominator, t_N = t_min
    edm_grid: str = "zero_end"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.T is None and self.family in DISCRETE_FAMILIES:
            object.__setattr__(self, "T", _DEFAULT_T[self.family])
        if self.edm_grid not in ("zero_end", "tmin_end"):
            raise ValueError(f"edm_grid must be 'zero_end' or 'tmin_end', got {self.edm_grid!r}")
        if self.family in DISCRETE_FAMILIES:
            object.__setattr__(self, "_alpha_bar_table", self._build_alpha_bar())

    @property
    def is_discrete(self) -> bool:
        return self.family in DISCRETE_FAMILIES

    @property
    def posterior_domain(self) -> tuple[float, float]:
        """Bounded range over which p(t|z) is integrated."""
        if self.is_discrete:
            return 1.0, float(self.T)
        if self.family in EDM_FAMILIES:
            return self.t_min, self.t_max
        return 0.0, 1.0

    @property
    def t_start(self) -> float:
        """Noise level of the first sampling step."""
        if self.is_discrete:
            return float(self.T)
        if self.family in EDM_FAMILIES:
            return self.t_max
        return 1.0

    # -- alpha-bar for the discrete families --------------------------------

    def _build_alpha_bar(self) -> np.ndarray:
        steps = np.arange(self.T + 1)
        if self.family == "iddpm":
            table = 0.5 * (1.0 + np.cos(np.pi * steps / self.T))
            table[-1] = 0.0  # cos(pi) = -1 up to rounding
            return table
        ramp = np.arange(self.T) / (self.T - 1) if self.T > 1 else np.zeros(1)
        factors = 1.0 - self.k1 - self.k2 * ramp
        if np.any(factors <= 0) or np.any(factors >= 1):
            raise ValueError("linear schedule factors must lie in (0, 1)")
        return np.concatenate([[1.0], np.cumprod(factors)])

    def alpha_bar(self, t) -> np.ndarray:
        """alpha-bar at integer time steps 0..T."""
        if not self.is_discrete:
            raise ValueError(f"alpha_bar is only defined for discrete families, not {self.family}")
        t = np.asarray(t)
        idx = np.rint(t).astype(np.int64)
        if np.any(np.abs(t - idx) > 0) or np.any(idx < 0) or np.any(idx > self.T):
            raise DomainError(f"discrete time steps must be integers in [0, {self.T}]")
        return self._alpha_bar_table[idx]

    # -- training schedules --------------------------------------------------

    def check_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if not np.all(np.isfinite(t)):
            raise DomainError("time values must be finite")
        if self.is_discrete:
            self.alpha_bar(t)
        elif self.family in EDM_FAMILIES:
            if np.any(t <= 0) or np.any(t > self.t_max):
                raise DomainError(f"{self.family} times must lie in (0, {self.t_max}]")
        elif np.any(t < 0) or np.any(t > 1):
            raise DomainError("fm times must lie in [0, 1]")
        return t

    def a(self, t):
        return self.coefficients(t)[0]

    def b(self, t):
        return self.coefficients(t)[1]

    def coefficients(self, t):
        """Return ``(a, b, c, d, w)`` evaluated at ``t`` (scalar or array)."""
        t = self.check_domain(t)
        one = np.ones_like(t)
        if self.is_discrete:
            ab = self.alpha_bar(t)
            return np.sqrt(ab), np.sqrt(1.0 - ab), 0.0 * one, one, one
        if self.family == "fm":
            return 1.0 - t, t, -one, one, one
        s2 = self.sigma_d**2
        if self.family == "edm":
            root = np.sqrt(t * t + s2)
            return 1.0 / root, t / root, t / (self.sigma_d * root), -self.sigma_d / root, one
        root = np.sqrt(t * t + 1.0)
        return (
            1.0 / root,
            t / root,
            t * t / (t * t + s2),
            -t * s2 / (t * t + s2),
            (s2 + t * t) / (self.sigma_d * t),
        )

    def log_prior(self, t) -> np.ndarray:
        """Log density of p(t) in the quadrature variable used for p(t|z).

        EDM-type families are integrated in ``log t``, so their prior is the
        normal density of ``log t``. Discrete families use a probability mass.
        """
        t = np.asarray(t, dtype=np.float64)
        if self.is_discrete:
            return np.full_like(t, -math.log(self.T))
        if self.family == "fm":
            return np.zeros_like(t)
        u = np.log(t)
        return (
            -0.5 * ((u - self.prior_mean) / self.prior_std) ** 2
            - math.log(self.prior_std)
            - 0.5 * math.log(2 * math.pi)
        )


def eval_train_schedule(spec: ScheduleSpec, t: float) -> tuple[float, float, float, float, float]:
    """Scalar ``(a, b, c, d, w)`` for one time value."""
    return tuple(float(v) for v in spec.coefficients(t))


def sample_time_prior(spec: ScheduleSpec, rng: np.random.Generator, size=None):
    """Draw noise levels from the family's training prior."""
    if spec.is_discrete:
        return rng.integers(1, spec.T + 1, size=size)
    if spec.family == "fm":
        return rng.uniform(0.0, 1.0, size=size)
    return np.exp(rng.normal(spec.prior_mean, spec.prior_std, size=size))


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    family: str
    t: np.ndarray  # t_0 (noisiest) ... t_N

    @property
    def N(self) -> int:
        return len(self.t) - 1


def make_time_grid(spec: ScheduleSpec, N: int) -> TimeGrid:
    """Sampling times ``t_0 > t_1 > ... > t_N`` for ``N`` steps."""
    if N < 1:
        raise ValueError("N must be at least 1")
    i = np.arange(N + 1, dtype=np.float64)
    if spec.is_discrete:
        raw = (N - i) / N * spec.T
        t = np.rint(raw)
        if np.any(t != raw):
            warnings.warn("discrete time grid rounded to integer steps", stacklevel=2)
        if np.any(np.diff(t) >= 0):
            raise ValueError(f"N={N} exceeds the {spec.T} available discrete steps")
    elif spec.family == "fm":
        t = 1.0 - i / N
    else:
        hi, lo = spec.t_max ** (1 / spec.rho), spec.t_min ** (1 / spec.rho)
        if spec.edm_grid == "tmin_end":
            t = (hi + i / N * (lo - hi)) ** spec.rho
            t[-1] = spec.t_min
        elif N == 1:
            t = np.array([spec.t_max, 0.0])
        else:
            t = ((hi * (N - i - 1) + lo * i) / (N - 1)) ** spec.rho
            t[-2:] = spec.t_min, 0.0
        t[0] = spec.t_max  # the rho-th power round trip can overshoot t_max by an ulp
    return TimeGrid(spec.family, t)


@dataclasses.dataclass(frozen=True)
class SamplerPlan:
    """Per-step coefficients of the first-order sampler.

    ``output_scale`` multiplies the final state; it undoes the input scaling of
    the EDM-type parameterisations and is 1 elsewhere.
    """

    family: str
    times: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    lam: Optional[float] = None
    output_scale: float = 1.0

    def __post_init__(self):
        n = len(self.times) - 1
        if not (len(self.kappa) == len(self.eta) == len(self.zeta) == n):
            raise ValueError("kappa, eta and zeta must have one entry per step")
        if np.any(np.diff(self.times) >= 0):
            raise ValueError("sampler times must be strictly decreasing")
        for name in ("kappa", "eta", "zeta"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite {name} coefficient")
        if np.any(self.kappa < 0):
            raise ValueError("negative kappa; the accumulated bound assumes kappa >= 0")

    @property
    def N(self) -> int:
        return len(self.times) - 1

    @property
    def is_ode(self) -> bool:
        return bool(np.all(self.zeta == 0))


def iddpm_coefficients(ab: np.ndarray):
    """Ancestral (SDE) sampler coefficients from an alpha-bar sequence."""
    cur, nxt = ab[:-1], ab[1:]
    kappa = np.sqrt(nxt / cur)
    eta = (np.sqrt(cur / nxt) - np.sqrt(nxt / cur)) / np.sqrt(1.0 - cur)
    zeta = np.sqrt((1.0 - cur / nxt) * (1.0 - nxt) / (1.0 - cur))
    return kappa, eta, zeta


def ddim_coefficients(ab: np.ndarray, lam: float = 0.0):
    """DDIM sampler coefficients; ``lam`` interpolates from ODE (0) to ancestral (1)."""
    cur, nxt = ab[:-1], ab[1:]
    var = (nxt - cur) * (1.0 - nxt) / (nxt * (1.0 - cur))
    kappa = np.sqrt(nxt / cur)
    eta = np.sqrt(np.maximum(1.0 - nxt - lam**2 * var, 0.0)) - np.sqrt(nxt / cur * (1.0 - cur))
    zeta = lam * np.sqrt(var)
    return kappa, eta, zeta


def sampler_coefficients(spec: ScheduleSpec, grid: TimeGrid, lam: Optional[float] = None) -> SamplerPlan:
    """Build the sampler plan for ``grid`` using the family's closed forms."""
    if grid.family != spec.family:
        raise ValueError(f"grid built for {grid.family}, spec is {spec.family}")
    if lam is not None:
        if spec.family != "ddim":
            raise ValueError("lam is only defined for the ddim family")
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {lam}")
    t = np.asarray(grid.t, dtype=np.float64)
    scale = 1.0
    if spec.is_discrete:
        ab = spec.alpha_bar(t)
        if np.any(ab[:-1] == 0):
            raise ValueError(
                "alpha_bar is exactly 0 at a sampling step (cosine schedule at t=T); "
                "kappa and eta are unbounded there"
            )
        if spec.family == "iddpm":
            kappa, eta, zeta = iddpm_coefficients(ab)
        else:
            kappa, eta, zeta = ddim_coefficients(ab, 0.0 if lam is None else lam)
    elif spec.family == "fm":
        kappa = np.ones(grid.N)
        eta = t[1:] - t[:-1]
        zeta = np.zeros(grid.N)
    else:
        cur, nxt = t[:-1], t[1:]
        if np.any(cur <= 0):
            raise DomainError("EDM sampling steps need t_i > 0 for i < N")
        s2 = spec.sigma_d**2
        shrink = 1.0 - cur * (cur - nxt) / (cur * cur + s2)
        if spec.family == "edm":
            kappa = np.sqrt((s2 + cur * cur) / (s2 + nxt * nxt)) * shrink
            eta = spec.sigma_d * (cur - nxt) / np.sqrt((cur * cur + s2) * (nxt * nxt + s2))
            scale = math.sqrt(t[-1] ** 2 + s2)
        else:
            kappa = np.sqrt((cur * cur + 1.0) / (nxt * nxt + 1.0)) * shrink
            eta = (cur - nxt) / (cur * np.sqrt(nxt * nxt + 1.0))
            scale = math.sqrt(t[-1] ** 2 + 1.0)
        zeta = np.zeros(grid.N)
    return SamplerPlan(spec.family, t, kappa, eta, zeta, lam=lam, output_scale=scale)


# -- EDM preconditioning ------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class EdmPrecondition:
    """Preconditioner ``D(z) = c_skip z + c_out NN(c_in z | t)`` with loss weight ``lam``."""

    c_in: Callable
    c_out: Callable
    c_skip: Callable
    lam: Callable

    @classmethod
    def edm(cls, sigma_d: float = 0.5) -> "EdmPrecondition":
        s2 = sigma_d**2
        return cls(
            c_in=lambda t: 1.0 / np.sqrt(s2 + t * t),
            c_out=lambda t: sigma_d * t / np.sqrt(s2 + t * t),
            c_skip=lambda t: s2 / (s2 + t * t),
            lam=lambda t: (s2 + t * t) / (s2 * t * t),
        )

    @classmethod
    def uedm(cls, sigma_d: float = 0.5) -> "EdmPrecondition":
        # Loss weight chosen so that lam * c_out^2 gives the tabulated uEDM w(t).
        s2 = sigma_d**2
        return cls(
            c_in=lambda t: 1.0 / np.sqrt(t * t + 1.0),
            c_out=lambda t: np.ones_like(np.asarray(t, dtype=np.float64)),
            c_skip=lambda t: s2 / (s2 + t * t),
            lam=lambda t: (s2 + t * t) / (sigma_d * t),
        )


@dataclasses.dataclass(frozen=True)
class AbsorbedSchedule:
    """Unified coefficients obtained by folding a preconditioner into the loss.

    ``output_scale`` is ``1 / c_in(t_N)`` for the grid passed to
    :meth:`sampler_coefficients`; for stock EDM ending at ``t_N = 0`` it equals
    ``sigma_d``.
    """

    pre: EdmPrecondition
    sigma_d: float

    def coefficients(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t <= 0):
            raise DomainError("absorbed EDM schedules need t > 0")
        p = self.pre
        c_in, c_out, c_skip = p.c_in(t), p.c_out(t), p.c_skip(t)
        return (
            c_in,
            t * c_in,
            (1.0 - c_skip) / c_out,
            -t * c_skip / c_out,
            p.lam(t) * c_out**2,
        )

    def sampler_coefficients(self, times):
        """Euler steps in the raw-network variable ``x_i = c_in(t_i) x_D,i``."""
        t = np.asarray(times, dtype=np.float64)
        cur, nxt = t[:-1], t[1:]
        if np.any(cur <= 0):
            raise DomainError("t_i = 0 before the final step; the Euler step divides by t_i")
        p = self.pre
        # (t'/t)(c_in(t')/c_in(t))(1 - (t'-t)/t' c_skip(t)), rearranged to avoid 1/t'
        kappa = p.c_in(nxt) / p.c_in(cur) * (nxt - (nxt - cur) * p.c_skip(cur)) / cur
        eta = (cur - nxt) / cur * p.c_out(cur) * p.c_in(nxt)
        zeta = np.zeros_like(kappa)
        return kappa, eta, zeta

    def output_scale(self, t_final: float) -> float:
        return float(1.0 / self.pre.c_in(np.float64(t_final)))


def edm_precondition_to_unified(pre: EdmPrecondition, sigma_d: float) -> AbsorbedSchedule:
    """Fold ``c_in, c_out, c_skip`` and the loss weight into unified coefficients."""
    return AbsorbedSchedule(pre, sigma_d)
