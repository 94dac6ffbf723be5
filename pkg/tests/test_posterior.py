from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schedlab.dataset import Dataset, corrupt, synth_points, synth_single_point
from schedlab.errors import NoSupportError
from schedlab.posterior import PosteriorConfig, brute_force_posterior, posterior_grid, posterior_profile
from schedlab.schedules import ScheduleSpec

FM = ScheduleSpec("fm")


def _stub_spec(a, b):
    """Continuous family on [0, 1] with a flat prior and constant schedules."""
    return SimpleNamespace(
        family="stub", is_discrete=False, posterior_domain=(0.0, 1.0),
        coefficients=lambda t: (np.full(np.shape(t), a), np.full(np.shape(t), b), 0, 1, 1),
        log_prior=lambda t: np.zeros(np.shape(t)),
    )


def test_single_point_variance_estimate():
    ds = synth_single_point(3072, 0.0)
    z = corrupt(ds, 0, 0.5, FM, 0).z
    var = posterior_grid(z, FM, ds).var_t
    assert var == pytest.approx(0.25 / (2 * 3072), rel=0.25)


def test_negation_symmetry():
    X = synth_points(3, 10, seed=2).data
    ds = Dataset(np.vstack([X, -X]))
    z = corrupt(ds, 0, 0.4, FM, 1).z
    p, q = posterior_grid(z, FM, ds), posterior_grid(-z, FM, ds)
    assert np.allclose(p.probs, q.probs, rtol=1e-12, atol=0)


def test_matches_dense_oracle_when_refined():
    # The default 100-point refinement is O(h^2)-accurate; with enough points
    # the two-stage scheme converges to the dense oracle.
    cfg = PosteriorConfig(refine_n=20_000)
    for k in range(10):
        rng = np.random.default_rng(k)
        ds = synth_points(4, 8, seed=k)
        z = corrupt(ds, int(rng.integers(4)), rng.uniform(0.05, 0.95), FM, k).z
        p = posterior_grid(z, FM, ds, cfg)
        m, v = brute_force_posterior(z, FM, ds)
        assert p.mean_t == pytest.approx(m, rel=1e-6) and p.var_t == pytest.approx(v, rel=1e-6)


def test_default_refinement_error_shrinks_quadratically():
    ds = synth_points(4, 8, seed=5)
    z = corrupt(ds, 0, 0.8, FM, 5).z
    _, v = brute_force_posterior(z, FM, ds)
    errs = [abs(posterior_grid(z, FM, ds, PosteriorConfig(refine_n=n)).var_t - v) for n in (100, 1000)]
    assert errs[1] < errs[0] / 50


def test_edge_tstar_agrees_with_oracle():
    ds = synth_single_point(64, "uniform_pm1")
    z = corrupt(ds, 0, 0.02, FM, 3).z
    assert posterior_grid(z, FM, ds).mean_t == pytest.approx(brute_force_posterior(z, FM, ds)[0], abs=1e-4)


def test_uniform_moments_with_flat_likelihood():
    spec = _stub_spec(1.0, 1.0)
    ds = Dataset(np.zeros((1, 2)))
    m, v = brute_force_posterior(np.ones(2), spec, ds)
    assert m == pytest.approx(0.5, abs=1e-12) and v == pytest.approx(1 / 12, rel=1e-8)
    p = posterior_grid(np.ones(2), spec, ds)
    assert p.mean_t == pytest.approx(0.5, abs=1e-12)


def test_no_support():
    with pytest.raises(NoSupportError):
        posterior_grid(np.ones(2), _stub_spec(1.0, 0.0), Dataset(np.zeros((1, 2))))


def test_oracle_needs_enough_points():
    with pytest.raises(ValueError):
        brute_force_posterior(np.zeros(2), FM, Dataset(np.zeros((1, 2))), n_points=10)


def test_discrete_family_sums_exactly():
    spec = ScheduleSpec("ddim")
    ds = synth_points(3, 32, seed=0)
    z = corrupt(ds, 1, 400, spec, 0).z
    p = posterior_grid(z, spec, ds)
    m, v = brute_force_posterior(z, spec, ds)
    assert p.measure == "counting" and np.all(p.refined_grid == np.rint(p.refined_grid))
    assert p.mean_t == pytest.approx(m, rel=1e-12) and p.var_t == pytest.approx(v, rel=1e-9)


def test_edm_family_log_measure():
    spec = ScheduleSpec("edm")
    ds = synth_points(4, 64, seed=1)
    z = corrupt(ds, 0, 0.5, spec, 0).z
    p = posterior_grid(z, spec, ds)
    m, v = brute_force_posterior(z, spec, ds)
    assert p.measure == "log_t"
    assert 0.002 <= p.refined_interval[0] <= p.refined_interval[1] <= 80
    assert p.mean_t == pytest.approx(m, rel=1e-9) and p.var_t == pytest.approx(v, rel=1e-6)


@given(st.floats(0.05, 0.95), st.integers(0, 10_000), st.sampled_from([4, 16, 256]))
def test_posterior_invariants(tstar, seed, d):
    ds = synth_points(3, d, seed=seed)
    p = posterior_grid(corrupt(ds, seed % 3, tstar, FM, seed).z, FM, ds)
    assert np.all(p.density >= 0) and p.var_t >= 0
    assert abs(np.sum(p.weights * p.quad_weights) - 1) < 1e-10
    lo, hi = FM.posterior_domain
    assert lo <= p.refined_interval[0] <= p.refined_interval[1] <= hi


def test_single_point_mass_config():
    ds = synth_points(2, 16, seed=0)
    p = posterior_grid(corrupt(ds, 0, 0.5, FM, 0).z, FM, ds, PosteriorConfig(refine_n=1))
    assert p.refined_grid.size == 1 and p.var_t == 0 and p.probs[0] == 1


def test_profile_shape_and_scaling():
    small = posterior_profile(synth_single_point(1024, "uniform_pm1"), FM, [0.5], 25, seed=0)
    large = posterior_profile(synth_single_point(4096, "uniform_pm1"), FM, [0.5], 25, seed=0)
    assert len(small.rows) == 25 and set(small.rows[0]) == {"tstar", "sample_idx", "mean_t", "var_t"}
    s = small.summary[0]
    assert s["var_stderr"] > 0 and s["estimate"] == 0.25 / 2048
    assert large.summary[0]["var_mean"] / s["var_mean"] == pytest.approx(0.25, rel=0.2)


def test_profile_variance_grows_with_tstar():
    ds = synth_points(20, 512, seed=0)
    prof = posterior_profile(ds, FM, [0.1, 0.3, 0.5, 0.7, 0.9], 10, seed=1)
    means = [r["var_mean"] for r in prof.summary]
    assert all(a <= b for a, b in zip(means, means[1:]))


def test_profile_is_reproducible():
    ds = synth_points(5, 32, seed=0)
    a = posterior_profile(ds, FM, [0.3, 0.6], 4, seed=9)
    b = posterior_profile(ds, FM, [0.3, 0.6], 4, seed=9)
    assert a.rows == b.rows
