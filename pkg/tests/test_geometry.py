import numpy as np
import pytest
import sympy as sp

from spiralflow import geometry as geo
from spiralflow.errors import DomainError

LAM = 0.330958  # any value near the angular velocity serves for pointwise kernels


# -- grids ----------------------------------------------------------------


def test_grid_rejects_bad_nodes():
    with pytest.raises(DomainError):
        geo.Grid(np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        geo.Grid(np.array([0.0, 2.0, 1.0]), includes_origin=True)
    with pytest.raises(DomainError):
        geo.Grid(np.array([0.0, 1.0, np.nan]), includes_origin=True)
    with pytest.raises(DomainError):
        geo.Grid(np.array([0.0, 1.0, 2.0]))  # radial without origin flag must start at r > 0


def test_grid_nodes_read_only():
    g = geo.Grid.radial_uniform(1.0, 0.1)
    with pytest.raises(ValueError):
        g.nodes[1] = 5.0


def test_graded_grid_shape():
    g = geo.Grid.radial_graded(50.0)
    h = g.spacing
    assert g.nodes[0] == 0.0 and g.nodes[-1] == pytest.approx(50.0)
    assert h[0] == pytest.approx(1e-3) and h[1] == pytest.approx(h[0])
    # the uniform tail is stretched to land on r_max exactly
    assert h.max() <= 1e-2 * (1 + 1e-4)
    assert np.all(h[1:] / h[:-1] <= 1.05 + 1e-9)


def test_annulus_grid_relative_spacing():
    g = geo.Grid.annulus(0.1, 10.0, rel=0.02, dr_max=0.04)
    h = g.spacing
    assert g.nodes[0] == 0.1 and g.nodes[-1] == 10.0
    assert np.all(h[:-1] <= 0.02 * g.nodes[:-2] + 1e-15)


# -- kernels ----------------------------------------------------------------


def test_rhs_radial_domain():
    with pytest.raises(DomainError):
        geo.rhs_radial(0.0, -0.5, 0.1)
    with pytest.raises(DomainError):
        geo.rhs_radial(1.0, np.inf, 0.0)


def test_straight_ray_has_zero_curvature():
    # U = const is a ray theta = const: kappa = 0, so U_t = 1/r
    r = np.array([0.5, 1.0, 4.0])
    assert np.allclose(geo.curvature(r, 0.0, 0.0), 0.0)
    assert np.allclose(geo.rhs_radial(r, 0.0, 0.0), 1.0 / r)


def test_curvature_matches_parametric_formula():
    # oracle: curvature of (r cos th, r sin th) with th = -U(r), via sympy
    r = sp.symbols("r", positive=True)
    U = sp.sin(r) + r**2 / 3
    th = -U
    X, Y = r * sp.cos(th), r * sp.sin(th)
    k = (sp.diff(X, r) * sp.diff(Y, r, 2) - sp.diff(Y, r) * sp.diff(X, r, 2)) / (
        sp.diff(X, r) ** 2 + sp.diff(Y, r) ** 2
    ) ** sp.Rational(3, 2)
    f = sp.lambdify(r, k)
    p, q = sp.lambdify(r, sp.diff(U, r)), sp.lambdify(r, sp.diff(U, r, 2))
    # orientation: with theta = -U the arc is traversed clockwise, flipping the sign
    for rv in (0.3, 1.0, 2.5):
        assert geo.curvature(rv, p(rv), q(rv)) == pytest.approx(-f(rv), rel=1e-12)


def test_origin_curvature_limit():
    assert geo.curvature(0.0, -0.5, 0.2) == pytest.approx(-1.0)


def test_origin_compatibility_matches_taylor_limit():
    # U = -r/2 + q0 r^2 / 2 near the origin: F(r) -> 3 q0 as r -> 0
    q0 = 0.11
    for r in (1e-3, 1e-4):
        val = geo.rhs_radial(r, -0.5 + q0 * r, q0)
        assert val == pytest.approx(geo.origin_compatibility(-0.5, q0)[1], abs=10 * r)
    assert geo.origin_compatibility(-0.5, q0)[0] == 0.0


def test_partials_match_finite_differences():
    r, p, q = 1.7, -0.4, 0.3
    dp, dq = geo.rhs_radial_partials(r, p, q)
    h = 1e-6
    fdp = (geo.rhs_radial(r, p + h, q) - geo.rhs_radial(r, p - h, q)) / (2 * h)
    fdq = (geo.rhs_radial(r, p, q + h) - geo.rhs_radial(r, p, q - h)) / (2 * h)
    assert dp == pytest.approx(fdp, rel=1e-8)
    assert dq == pytest.approx(fdq, rel=1e-8)


def test_chart_identity_point():
    r, p, q = 2.0, -0.37, 0.05
    assert geo.rhs_log(*geo.to_log_chart(r, p, q)) == pytest.approx(geo.rhs_radial(r, p, q), rel=1e-13)


# -- profile ODE and nullcline -------------------------------------------------


def test_nullcline_is_root():
    x0 = geo.nullcline_threshold(LAM)
    x = np.linspace(x0, 12.0, 500)
    v0 = geo.nullcline_v0(x, LAM)
    assert np.all(np.abs(geo.ode_f(v0, x, LAM)) <= 1e-10 * np.exp(3 * x))


def test_nullcline_threshold_definition():
    x0 = geo.nullcline_threshold(LAM)
    assert geo.nullcline_v0(x0, LAM) <= -1.0
    with pytest.raises(DomainError):
        geo.nullcline_v0(0.0, LAM)


def test_nullcline_derivative():
    x = np.array([2.0, 5.0, 9.0])
    h = 1e-6
    fd = (geo.nullcline_v0(x + h, LAM) - geo.nullcline_v0(x - h, LAM)) / (2 * h)
    assert np.allclose(geo.nullcline_v0_dx(x, LAM), fd, rtol=1e-7)


def test_ode_f_dw_matches_finite_differences():
    w, x = -3.0, 2.0
    h = 1e-6
    fd = (geo.ode_f(w + h, x, LAM) - geo.ode_f(w - h, x, LAM)) / (2 * h)
    assert geo.ode_f_dw(w, x, LAM) == pytest.approx(fd, rel=1e-7)


def test_monotonicity_below_the_nullcline():
    rng = np.random.default_rng(3)
    x0 = geo.nullcline_threshold(LAM)
    for _ in range(200):
        x = rng.uniform(x0, 10.0)
        w = geo.nullcline_v0(x, LAM) - rng.uniform(0.0, 5.0) * np.exp(x)
        h = 1e-6 * max(1.0, abs(w))
        fd = (geo.ode_f(w + h, x, LAM) - geo.ode_f(w - h, x, LAM)) / (2 * h)
        assert fd >= 0.5 * LAM**2 * np.exp(3 * x)


def test_offset_form_agrees_where_direct_form_is_accurate():
    x = np.array([1.5, 2.0])
    v0 = geo.nullcline_v0(x, LAM)
    d = np.array([0.3, 0.05])
    assert np.allclose(geo.ode_f_offset(d, x, LAM), geo.ode_f(v0 - d, x, LAM), rtol=1e-9)


def test_offset_form_is_linear_in_small_d():
    x = 10.0
    a = geo.ode_f_offset(1e-12, x, LAM)
    b = geo.ode_f_offset(2e-12, x, LAM)
    assert b / a == pytest.approx(2.0, rel=1e-6)


# -- barriers --------------------------------------------------------------


def test_circle_barrier_symbolic_oracle():
    r = sp.symbols("r", positive=True)
    g = -sp.asin(r / 2)
    p, q = sp.diff(g, r), sp.diff(g, r, 2)
    s = 1 + r**2 * p**2
    F = (sp.sqrt(s) + p * (2 + r**2 * p**2) / s + r * q / s) / r
    # exact zero: check to 40 digits at points spread over (0, 2)
    for rv in ("0.05", "0.7", "1", "1.6", "1.95"):
        assert abs(F.evalf(50, subs={r: sp.Rational(rv)})) < 1e-40
    _, gr, grr = geo.circle_barrier(1.0)
    assert float(p.subs(r, 1)) == pytest.approx(gr, rel=1e-15)
    assert float(q.subs(r, 1)) == pytest.approx(grr, rel=1e-15)
    assert abs(geo.rhs_radial(1.0, gr, grr)) <= 1e-10


def test_circle_barrier_residual_range():
    r = np.linspace(0.05, 1.95, 1901)
    _, gr, grr = geo.circle_barrier(r)
    assert np.max(np.abs(geo.rhs_radial(r, gr, grr))) <= 1e-8
    with pytest.raises(DomainError):
        geo.circle_barrier(2.0)


def test_cutoff_derivatives():
    r = np.linspace(0.52, 0.98, 47)
    h = 1e-5
    z, z1, z2 = geo.cutoff(r)
    zp, zm = geo.cutoff(r + h)[0], geo.cutoff(r - h)[0]
    assert np.allclose(z1, (zp - zm) / (2 * h), atol=1e-6)
    assert np.allclose(z2, (zp - 2 * z + zm) / h**2, atol=1e-3)
    assert geo.cutoff(0.3)[0] == 1.0 and geo.cutoff(1.2)[0] == 0.0


def test_lambda_hat_is_an_upper_bound_candidate():
    lam_hat, r_hat = geo.circle_lambda_hat()
    assert 0.5 <= r_hat <= 1.0
    assert lam_hat > 0.5  # above the bracket end, hence consistent with lambda <= lambda_hat


def test_h_mu_lower_bound():
    mu = geo.LOWER_BARRIER.mu
    x = np.arange(-30.0, 30.0 + 5e-4, 1e-3)
    h = geo.h_mu(x, mu)
    assert h.min() >= 0.25
    assert h.min() == pytest.approx(0.3125, abs=1e-6)


def test_h_mu_closed_form_matches_rhs_log():
    mu = 0.4
    x = np.linspace(-3, 3, 13)
    ux = -mu * np.exp(x)
    assert np.allclose(geo.h_mu(x, mu), geo.rhs_log(x, ux, ux), rtol=1e-13)


def test_h_mu_limits():
    # x -> +inf: h_mu -> mu (not 0); x -> -inf: h_mu ~ (1 - 2 mu) e^{-x}
    mu = geo.LOWER_BARRIER.mu
    assert geo.h_mu(30.0, mu) == pytest.approx(mu, rel=1e-9)
    assert geo.h_mu(-30.0, mu) == pytest.approx((1 - 2 * mu) * np.exp(30.0), rel=1e-9)


def test_nullcline_threshold_skips_the_sliver_near_the_origin():
    # the root is real again just above x = 0, but not on a neighbourhood of x = 0.5
    assert geo.nullcline_discriminant(0.01, LAM) > 0
    assert geo.nullcline_discriminant(0.5, LAM) < 0
    x0 = geo.nullcline_threshold(LAM)
    x = np.arange(x0, 20.0, 1e-3)
    assert np.all(geo.nullcline_discriminant(x, LAM) >= 0)
    assert np.all(geo.nullcline_v0(x, LAM) <= -1.0)
