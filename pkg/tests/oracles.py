"""Independent reference computations used only by the tests.

Everything here is written directly from the defining formulas with plain
loops or naive exponentiation, sharing no code with the package.
"""

import math

import numpy as np


def fm_ab(t):
    return 1.0 - t, t


def naive_density(z, a, b, X):
    """p(z|t) by direct exponentiation (underflows for large d)."""
    N, d = X.shape
    total = 0.0
    for x in X:
        q = sum((zi - a * xi) ** 2 for zi, xi in zip(z, x))
        total += math.exp(-q / (2 * b * b))
    return total / N / (2 * math.pi * b * b) ** (d / 2)


def naive_responsibilities(z, a, b, X):
    k = np.array([math.exp(-float(np.sum((z - a * x) ** 2)) / (2 * b * b)) for x in X])
    return k / k.sum()


def naive_posterior_mean_x(z, a, b, X):
    w = naive_responsibilities(z, a, b, X)
    return sum(wi * x for wi, x in zip(w, X))


def naive_cond_target(z, a, b, c, d, X):
    return (d / b) * z + (c - a * d / b) * naive_posterior_mean_x(z, a, b, X)


def fm_cond_target(z, t, X):
    a, b = fm_ab(t)
    return naive_cond_target(z, a, b, -1.0, 1.0, X)


def fm_posterior_on_grid(z, ts, X):
    """Normalised trapezoidal weights of p(t|z) for flow matching with a uniform prior."""
    logs = []
    d = X.shape[1]
    for t in ts:
        a, b = fm_ab(t)
        if b <= 0:
            logs.append(-np.inf)
            continue
        q = np.array([np.sum((z - a * x) ** 2) for x in X])
        m = np.max(-q / (2 * b * b))
        logs.append(m + math.log(np.sum(np.exp(-q / (2 * b * b) - m))) - d * math.log(b))
    logs = np.array(logs)
    f = np.exp(logs - logs.max())
    w = np.zeros_like(ts)
    h = np.diff(ts)
    w[:-1] += h / 2
    w[1:] += h / 2
    p = f * w
    return p / p.sum()


def fm_uncond_target(z, ts, X):
    p = fm_posterior_on_grid(z, ts, X)
    return sum(pk * fm_cond_target(z, t, X) for pk, t in zip(p, ts) if pk > 0)


def edm_absorbed_row(t, sigma_d):
    """EDM training coefficients written from the tabulated closed forms."""
    s = math.sqrt(t * t + sigma_d * sigma_d)
    return 1 / s, t / s, t / (sigma_d * s), -sigma_d / s, 1.0


def uedm_absorbed_row(t, sigma_d):
    s2 = sigma_d * sigma_d
    return (
        1 / math.sqrt(t * t + 1),
        t / math.sqrt(t * t + 1),
        t * t / (t * t + s2),
        -t * s2 / (t * t + s2),
        (s2 + t * t) / (sigma_d * t),
    )


def iddpm_step(ab_t, ab_next):
    """Ancestral DDPM coefficients for one step, from the posterior q(x_{t-1}|x_t, x_0)."""
    alpha = ab_t / ab_next
    beta = 1 - alpha
    kappa = 1 / math.sqrt(alpha)
    eta = -beta / (math.sqrt(alpha) * math.sqrt(1 - ab_t))
    zeta = math.sqrt(beta * (1 - ab_next) / (1 - ab_t))
    return kappa, eta, zeta


def ddim_ode_step(ab_t, ab_next):
    kappa = math.sqrt(ab_next / ab_t)
    eta = math.sqrt(1 - ab_next) - math.sqrt(ab_next * (1 - ab_t) / ab_t)
    return kappa, eta, 0.0
