import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ddim_ode_step, edm_absorbed_row, iddpm_step, uedm_absorbed_row
from schedlab.errors import DomainError
from schedlab.schedules import (
    EdmPrecondition, SamplerPlan, ScheduleSpec, edm_precondition_to_unified,
    eval_train_schedule, iddpm_coefficients, make_time_grid, sample_time_prior, sampler_coefficients,
)


# -- training coefficients ---------------------------------------------------


def test_fm_coefficients_at_quarter():
    assert eval_train_schedule(ScheduleSpec("fm"), 0.25) == (0.75, 0.25, -1.0, 1.0, 1.0)


def test_edm_coefficients_at_half():
    a, b, c, d, w = eval_train_schedule(ScheduleSpec("edm", sigma_d=0.5), 0.5)
    assert a == pytest.approx(math.sqrt(2), rel=1e-12)
    assert b == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert c == pytest.approx(math.sqrt(2), rel=1e-12)
    assert d == pytest.approx(-math.sqrt(0.5), rel=1e-12)
    assert w == 1.0


def test_iddpm_cosine_midpoint():
    spec = ScheduleSpec("iddpm")
    assert spec.T == 4000
    assert spec.alpha_bar(2000) == pytest.approx(0.5, abs=1e-15)
    a, b, c, d, w = eval_train_schedule(spec, 2000)
    assert a == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert b == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert (c, d, w) == (0.0, 1.0, 1.0)


def test_uedm_weight():
    s = 0.5
    for t in (0.01, 0.7, 80.0):
        assert eval_train_schedule(ScheduleSpec("uedm"), t)[4] == pytest.approx((s * s + t * t) / (s * t), rel=1e-14)


@pytest.mark.parametrize(
    "family,t",
    [("fm", -0.1), ("fm", 1.5), ("edm", 0.0), ("edm", 81.0), ("uedm", -1.0), ("ddim", 2.5), ("ddim", 1001),
     ("iddpm", -1), ("fm", float("nan"))],
)
def test_domain_violations(family, t):
    with pytest.raises(DomainError):
        eval_train_schedule(ScheduleSpec(family), t)


def test_unknown_family():
    with pytest.raises(ValueError):
        ScheduleSpec("vp")


@given(st.integers(0, 4000))
def test_iddpm_variance_preserving(t):
    a, b = ScheduleSpec("iddpm").coefficients(t)[:2]
    assert abs(a * a + b * b - 1) < 1e-12


@given(st.integers(0, 1000))
def test_ddim_variance_preserving(t):
    a, b = ScheduleSpec("ddim").coefficients(t)[:2]
    assert abs(a * a + b * b - 1) < 1e-12


@given(st.floats(0, 1))
def test_fm_invariants(t):
    a, b, c, d, w = ScheduleSpec("fm").coefficients(t)
    assert abs(a + b - 1) < 1e-12 and c == -1 and d == 1 and w == 1


@given(st.sampled_from(["edm", "uedm"]), st.floats(1e-4, 80))
def test_edm_ratio(family, t):
    a, b = ScheduleSpec(family).coefficients(t)[:2]
    assert abs(b / a - t) <= 1e-12 * max(1.0, t)


def test_alpha_bar_tables():
    cos = ScheduleSpec("iddpm").alpha_bar(np.arange(4001))
    assert cos[0] == 1.0 and cos[-1] == 0.0
    assert np.all(np.diff(cos) <= 0)
    spec = ScheduleSpec("ddim")
    lin = spec.alpha_bar(np.arange(1001))
    assert lin[0] == 1.0 and np.all(np.diff(lin) < 0)
    factors = lin[1:] / lin[:-1]
    assert np.all((factors > 0) & (factors < 1))
    # independent product for one step
    manual = np.prod([1 - 1e-4 - 2e-2 * i / 999 for i in range(500)])
    assert lin[500] == pytest.approx(manual, rel=1e-12)


# -- time prior ----------------------------------------------------------------


def test_fm_prior_support():
    t = sample_time_prior(ScheduleSpec("fm"), np.random.default_rng(3), 1000)
    assert np.all((t >= 0) & (t <= 1))


def test_edm_prior_log_mean():
    t = sample_time_prior(ScheduleSpec("edm"), np.random.default_rng(0), 10**6)
    assert abs(np.log(t).mean() + 1.2) < 0.01


def test_iddpm_prior_support():
    t = sample_time_prior(ScheduleSpec("iddpm"), np.random.default_rng(0), 10**5)
    assert t.dtype.kind == "i" and t.min() >= 1 and t.max() <= 4000


# -- time grids ------------------------------------------------------------------


def test_edm_grid_endpoints():
    g = make_time_grid(ScheduleSpec("edm"), 18)
    assert g.t[0] == pytest.approx(80.0, rel=1e-14)
    assert g.t[-2] == pytest.approx(0.002, rel=1e-12)
    assert g.t[-1] == 0.0
    assert g.N == 18


def test_edm_tmin_end_grid_flag():
    g = make_time_grid(ScheduleSpec("edm", edm_grid="tmin_end"), 18)
    assert g.t[0] == pytest.approx(80.0) and g.t[-1] == pytest.approx(0.002)


def test_fm_grid():
    g = make_time_grid(ScheduleSpec("fm"), 100)
    assert g.t[100] == 0.0 and g.t[0] == 1.0


def test_discrete_grid_rounding_warns():
    with pytest.warns(UserWarning):
        g = make_time_grid(ScheduleSpec("ddim"), 7)
    assert np.all(g.t == np.rint(g.t))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert make_time_grid(ScheduleSpec("ddim"), 100).t[1] == 990


def test_grid_rejects_zero_steps():
    with pytest.raises(ValueError):
        make_time_grid(ScheduleSpec("fm"), 0)


# -- sampler coefficients ------------------------------------------------------


def test_fm_plan():
    plan = sampler_coefficients(ScheduleSpec("fm"), make_time_grid(ScheduleSpec("fm"), 100))
    assert np.allclose(plan.eta, -0.01, rtol=0, atol=1e-15)
    assert np.all(plan.kappa == 1) and plan.is_ode


def _iddpm_formula_on_ddim_table(lam_plan):
    ab = ScheduleSpec("ddim").alpha_bar(lam_plan.times)
    return np.array([iddpm_step(ab[i], ab[i + 1]) for i in range(lam_plan.N)]).T


def test_ddim_lambda_one_equals_ancestral():
    spec = ScheduleSpec("ddim")
    plan = sampler_coefficients(spec, make_time_grid(spec, 100), lam=1.0)
    ref = _iddpm_formula_on_ddim_table(plan)
    for got, want in zip((plan.kappa, plan.eta, plan.zeta), ref):
        assert np.max(np.abs(got - want)) < 1e-12


def test_ddim_lambda_zero_equals_ode():
    spec = ScheduleSpec("ddim")
    grid = make_time_grid(spec, 100)
    plan = sampler_coefficients(spec, grid, lam=0.0)
    ode = sampler_coefficients(spec, grid)
    ab = spec.alpha_bar(grid.t)
    ref = np.array([ddim_ode_step(ab[i], ab[i + 1]) for i in range(100)]).T
    assert np.all(plan.zeta == 0)
    for got, same, want in zip((plan.kappa, plan.eta, plan.zeta), (ode.kappa, ode.eta, ode.zeta), ref):
        assert np.array_equal(got, same)
        assert np.max(np.abs(got - want)) < 1e-12


def test_iddpm_coefficients_match_oracle_interior():
    spec = ScheduleSpec("iddpm")
    ab = spec.alpha_bar(np.arange(3990, -1, -10))
    k, e, z = iddpm_coefficients(ab)
    ref = np.array([iddpm_step(ab[i], ab[i + 1]) for i in range(ab.size - 1)]).T
    assert np.allclose(k, ref[0], rtol=1e-12) and np.allclose(e, ref[1], rtol=1e-12)
    assert np.allclose(z, ref[2], rtol=1e-12)


def test_iddpm_rejects_zero_alpha_bar_step():
    spec = ScheduleSpec("iddpm")
    with pytest.raises(ValueError, match="alpha_bar"):
        sampler_coefficients(spec, make_time_grid(spec, 100))


@pytest.mark.parametrize("family", ["fm", "edm", "iddpm"])
def test_lambda_only_for_ddim(family):
    spec = ScheduleSpec(family)
    with pytest.raises(ValueError):
        sampler_coefficients(spec, make_time_grid(spec, 10), lam=0.5)


@pytest.mark.parametrize("lam", [-0.1, 1.5])
def test_lambda_range(lam):
    spec = ScheduleSpec("ddim")
    with pytest.raises(ValueError):
        sampler_coefficients(spec, make_time_grid(spec, 10), lam=lam)


def test_grid_family_mismatch():
    with pytest.raises(ValueError):
        sampler_coefficients(ScheduleSpec("edm"), make_time_grid(ScheduleSpec("fm"), 10))


@given(st.integers(1, 200), st.sampled_from(["fm", "edm", "uedm", "ddim"]))
def test_plan_shape_and_sign(N, family):
    spec = ScheduleSpec(family)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = sampler_coefficients(spec, make_time_grid(spec, N))
    assert len(plan.kappa) == len(plan.eta) == len(plan.zeta) == plan.N == N
    assert np.all(np.diff(plan.times) < 0) and np.all(plan.kappa >= 0)
    assert plan.is_ode


def test_plan_validation():
    t = np.array([1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        SamplerPlan("fm", t, np.ones(1), np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        SamplerPlan("fm", t[::-1], np.ones(2), np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        SamplerPlan("fm", t, -np.ones(2), np.ones(2), np.zeros(2))


def test_edm_output_scale():
    spec = ScheduleSpec("edm")
    assert sampler_coefficients(spec, make_time_grid(spec, 18)).output_scale == pytest.approx(0.5)
    u = ScheduleSpec("uedm")
    assert sampler_coefficients(u, make_time_grid(u, 18)).output_scale == 1.0


# -- precondition absorption ----------------------------------------------------


def test_edm_absorption_matches_closed_form_on_1000_points():
    s = 0.5
    absorbed = edm_precondition_to_unified(EdmPrecondition.edm(s), s)
    t = np.geomspace(0.002, 80, 1000)
    got = np.array(absorbed.coefficients(t))
    want = np.array([edm_absorbed_row(ti, s) for ti in t]).T
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-10


def test_uedm_absorption_matches_closed_form():
    s = 0.5
    absorbed = edm_precondition_to_unified(EdmPrecondition.uedm(s), s)
    t = np.geomspace(0.002, 80, 1000)
    got = np.array(absorbed.coefficients(t))
    want = np.array([uedm_absorbed_row(ti, s) for ti in t]).T
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-10
    assert np.allclose(got, np.array(ScheduleSpec("uedm").coefficients(t)), rtol=1e-12)


def test_identity_preconditions():
    ident = EdmPrecondition(lambda t: 1.0 + 0 * t, lambda t: 1.0 + 0 * t, lambda t: 0.0 * t, lambda t: 1.0 + 0 * t)
    a, b, c, d, w = edm_precondition_to_unified(ident, 0.5).coefficients(np.array([0.3, 2.0]))
    assert np.all(a == 1) and np.allclose(b, [0.3, 2.0]) and np.all(c == 1) and np.all(d == 0)
    assert np.all(w == 1)


def test_edm_stock_loss_weight_is_one():
    pre = EdmPrecondition.edm(0.5)
    t = np.geomspace(0.002, 80, 50)
    assert np.allclose(pre.lam(t) * pre.c_out(t) ** 2, 1.0, rtol=1e-13)


@pytest.mark.parametrize("family,factory", [("edm", EdmPrecondition.edm), ("uedm", EdmPrecondition.uedm)])
def test_absorbed_sampler_matches_closed_form(family, factory):
    spec = ScheduleSpec(family)
    grid = make_time_grid(spec, 50)
    plan = sampler_coefficients(spec, grid)
    absorbed = edm_precondition_to_unified(factory(0.5), 0.5)
    k, e, z = absorbed.sampler_coefficients(grid.t)
    assert np.allclose(k, plan.kappa, rtol=1e-12) and np.allclose(e, plan.eta, rtol=1e-12)
    assert absorbed.output_scale(grid.t[-1]) == pytest.approx(plan.output_scale, rel=1e-14)


def test_absorbed_sampler_rejects_zero_mid_grid():
    absorbed = edm_precondition_to_unified(EdmPrecondition.edm(), 0.5)
    with pytest.raises(DomainError):
        absorbed.sampler_coefficients(np.array([1.0, 0.0, -1.0]))


def test_ancestral_step_moves_noise_level_in_law():
    # One ancestral step with the exact eps-oracle maps N(a_t x, b_t^2) to N(a_s x, b_s^2).
    spec = ScheduleSpec("iddpm")
    t, s = 1000, 990
    ab = spec.alpha_bar(np.array([t, s]))
    kappa, eta, zeta = (v[0] for v in iddpm_coefficients(ab))
    rng = np.random.default_rng(0)
    x = np.full(4, 0.7)
    n = 200_000
    eps = rng.standard_normal((n, 4))
    z = math.sqrt(ab[0]) * x + math.sqrt(1 - ab[0]) * eps
    z_next = kappa * z + eta * eps + zeta * rng.standard_normal((n, 4))
    assert np.allclose(z_next.mean(axis=0), math.sqrt(ab[1]) * x, rtol=0.02)
    assert np.allclose(z_next.std(axis=0), math.sqrt(1 - ab[1]), rtol=0.02)
