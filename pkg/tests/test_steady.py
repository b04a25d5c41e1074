import dataclasses

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.optimize import brentq

from spiralflow import geometry as geo
from spiralflow.acceptance import PUBLISHED_LAMBDA
from spiralflow.errors import ConfigError, FitError, UsageError
from spiralflow.steady import (
    Classification,
    ProfileSolution,
    ShootingConfig,
    bisect_lambda,
    build_profile,
    fit_asymptotic_constant,
    phi_rr_from_ode,
    residual_decay_slope,
    shoot,
    verify_profile,
)


def _oracle_side(lam):
    """Independent classification: one LSODA run in the radial chart only."""

    def rhs(r, y):
        p = y[0]
        s = 1 + (r * p) ** 2
        return [(lam * r * s - s**1.5 - p * (2 + (r * p) ** 2)) / r]

    def up(r, y):
        return y[0]

    def down(r, y):
        return r * y[0] + 3 * lam * (r + 1) + 1

    up.terminal = down.terminal = True
    e = 1e-5
    sol = solve_ivp(rhs, (e, 1e5), [-0.5 + lam * e / 3], method="LSODA", rtol=1e-12,
                    atol=1e-14, events=[up, down])
    if sol.t_events[0].size:
        return 1.0
    if sol.t_events[1].size:
        return -1.0
    raise RuntimeError("oracle trajectory unresolved")


# -- configuration ----------------------------------------------------------


@pytest.mark.parametrize("kw", [
    {"lambda_lo": 0.5, "lambda_hi": 0.25},
    {"eps0": 2.0},
    {"rtol": 0.0},
    {"x_join": 11.0},
])
def test_shooting_config_validation(kw):
    with pytest.raises(ConfigError):
        ShootingConfig(**kw)


def test_refined_halves_step_controls():
    c = ShootingConfig()
    f = c.refined()
    assert f.eps0 == c.eps0 / 2 and f.rtol == c.rtol / 2 and f.lambda_tol == c.lambda_tol / 2


# -- angular velocity -----------------------------------------------------------


def test_lambda_against_published_value(lam):
    assert abs(lam - PUBLISHED_LAMBDA) <= 1e-6
    assert 0.25 <= lam <= 0.5


def test_lambda_against_independent_oracle(lam):
    assert _oracle_side(0.25) != _oracle_side(0.5)
    lam_oracle = brentq(_oracle_side, 0.25, 0.5, xtol=1e-12)
    assert abs(lam - lam_oracle) <= 1e-9


def test_bisection_contract(ctx):
    b = ctx.bisection
    assert b.hi - b.lo <= ctx.cfg.lambda_tol
    # orientation is found at the bracket ends, and they differ
    assert b.lo_class in (Classification.DIVE_BELOW, Classification.ESCAPE_ABOVE)
    width = ctx.cfg.lambda_hi - ctx.cfg.lambda_lo
    assert b.iterations == int(np.ceil(np.log2(width / ctx.cfg.lambda_tol)))


def test_lambda_stable_under_refinement(lam):
    fine = bisect_lambda(ShootingConfig().refined()).lam
    assert abs(fine - lam) <= 1e-7


def test_shoot_classifies_both_sides(lam):
    assert shoot(0.3).classification != shoot(0.4).classification
    out = shoot(lam)
    assert out.classification is Classification.MATCHED
    assert out.join_mismatch <= 1e-6


# -- profile ----------------------------------------------------------------


def test_phi_rr_at_origin(lam):
    assert phi_rr_from_ode(0.0, -0.5, lam) == pytest.approx(lam / 3)
    r = np.array([1e-6])
    assert phi_rr_from_ode(r, -0.5 + lam / 3 * r, lam)[0] == pytest.approx(lam / 3, rel=1e-4)


def test_profile_solves_the_stationary_equation(profile):
    r, lam = profile.r, profile.lam
    F = geo.rhs_radial(r[1:], profile.phi_r[1:], profile.phi_rr[1:])
    assert np.max(np.abs(F - lam)) <= 1e-8


def test_phi_is_the_integral_of_phi_r(profile):
    # oracle: trapezoid quadrature of the sampled slope on the first 20 units
    m = profile.r <= 20
    integ = cumulative_trapezoid(profile.phi_r[m], profile.r[m], initial=0.0)
    h = np.diff(profile.r[m]).max()
    assert np.max(np.abs(integ - profile.phi[m])) <= 0.1 * h**2 * 20


def test_phi_rr_matches_differenced_slope(profile):
    r = profile.r
    m = (r > 0.5) & (r < 50)
    fd = np.gradient(profile.phi_r, r)
    assert np.max(np.abs(fd[m] - profile.phi_rr[m])) <= 1e-5


def test_verify_profile_all_pass(profile):
    rep = verify_profile(profile)
    assert rep.passed, rep.summary()
    assert len(rep) >= 20


def test_profile_exact_origin_values(profile):
    assert profile.phi[0] == 0.0
    assert profile.phi_r[0] == -0.5
    assert profile.kappa[0] == -1.0


def test_r_max_beyond_horizon_rejected(lam):
    with pytest.raises(ConfigError):
        build_profile(lam, r_max=np.exp(12.5))


def test_asymptotic_constant_stable_under_doubling(ctx):
    assert abs(ctx.profile200.a - ctx.profile100.a) <= 1e-6


def test_far_field_slope_expansion(profile):
    # Phi_r = -lam - lam / r + O(1/r^2)
    r, lam = profile.r, profile.lam
    m = r >= 50
    err = np.abs(profile.phi_r[m] + lam + lam / r[m]) * r[m] ** 2
    assert err.max() < 10.0


# -- asymptotic fit on synthetic data (oracle by construction) --------------------------


def _synthetic(a, lam=0.33, r_max=100.0, c=(0.7, -0.4, 0.2)):
    grid = geo.Grid.radial_graded(r_max)
    r = grid.nodes
    s = 1 / (1 + r)
    phi = a - lam * r - lam * np.log1p(r) + c[0] * s + c[1] * s**2 + c[2] * s**3
    z = np.zeros_like(r)
    return ProfileSolution(lam, grid, phi, z, z, z, z)


def test_fit_recovers_known_constant():
    a, c_est = fit_asymptotic_constant(_synthetic(1.2345))
    assert a == pytest.approx(1.2345, abs=1e-10)
    assert 0 < c_est < 2


def test_fit_rejects_oscillating_tail():
    prof = _synthetic(0.5)
    r = prof.r
    noisy = dataclasses.replace(prof, phi=prof.phi + 1e-4 * np.sin(3 * r))
    with pytest.raises(FitError):
        fit_asymptotic_constant(noisy)


def test_fit_needs_long_domain():
    with pytest.raises(UsageError):
        fit_asymptotic_constant(_synthetic(0.5, r_max=20.0))


def test_decay_slope_of_synthetic_profile():
    prof = _synthetic(0.5)
    assert residual_decay_slope(prof, a=0.5) == pytest.approx(-1.0, abs=0.05)


# -- nullcline band ----------------------------------------------------------------


def test_nullcline_band(profile):
    b = profile.band
    assert b.min_gap >= -1e-14 * np.abs(b.v0).max()
    assert b.max_band_ratio <= 1.0 + 1e-12
    assert b.mu > 0
    # the band is exponentially thin relative to v0
    assert b.max_relative_gap < 1e-6


def test_trajectory_sits_below_nullcline_beyond_threshold(traj):
    x0 = geo.nullcline_threshold(traj.lam)
    x = np.linspace(max(x0, traj.cfg.x_join), 11.0, 400)
    assert np.all(traj.v(x) <= geo.nullcline_v0(x, traj.lam))
