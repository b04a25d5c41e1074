import numpy as np
import pytest

from spiralflow import geometry as geo
from spiralflow.errors import BlowupError, ConfigError, DomainError, UsageError
from spiralflow.evolution import (
    Boundary,
    DiscreteReference,
    EvolutionState,
    InitialData,
    RadialOperator,
    RunStats,
    annulus_grid,
    annulus_initial_data,
    cauchy_grid,
    cauchy_state,
    check_comparison,
    check_gradient_ordering,
    curvature_equation_residual,
    evolve,
    evolve_annulus,
    rosenbrock_step,
    steady_curvature_residual,
    steady_drift,
    step,
)


def _smooth(r):
    # smooth test function with U_r(0) = -1/2
    return -0.5 * r + 0.1 * r**2 * np.exp(-r / 3)


def _smooth_r(r):
    return -0.5 + (0.2 * r - 0.1 * r**2 / 3) * np.exp(-r / 3)


def _smooth_rr(r):
    return (0.2 - 0.4 * r / 3 + 0.1 * r**2 / 9) * np.exp(-r / 3)


def _uniform_state(U0=None, r_max=10.0, dr=0.02):
    g = geo.Grid.radial_uniform(r_max, dr)
    r = g.nodes
    U0 = _smooth(r) if U0 is None else U0
    return EvolutionState(0.0, g, U0, Boundary.origin(), Boundary.far_field(_smooth_r(r[-1])))


# -- state and boundary validation ---------------------------------------------


def test_state_validation():
    g = geo.Grid.radial_uniform(1.0, 0.1)
    with pytest.raises(DomainError):
        EvolutionState(0.0, g, np.zeros(3), Boundary.origin(), Boundary.neumann())
    with pytest.raises(DomainError):
        EvolutionState(0.0, g, np.zeros(11), Boundary.neumann(), Boundary.neumann())
    with pytest.raises(DomainError):
        EvolutionState(0.0, g, np.full(11, np.nan), Boundary.origin(), Boundary.neumann())
    with pytest.raises(DomainError):
        Boundary(Boundary.neumann().kind, 1.0)
    st = EvolutionState(0.0, g, np.zeros(11), Boundary.origin(), Boundary.neumann())
    with pytest.raises(ValueError):
        st.U[0] = 1.0


def test_unknown_variant():
    with pytest.raises(UsageError):
        RadialOperator.for_state(_uniform_state(), variant="upwind-ish")


# -- consistency of the discrete operator ------------------------------------------


@pytest.mark.parametrize("grid_fn", [
    lambda k: geo.Grid.radial_uniform(10.0, 0.04 / k),
    lambda k: geo.Grid.radial_graded(10.0, dr_min=2e-3 / k, dr_max=4e-2 / k),
])
def test_operator_second_order(grid_fn):
    errs = []
    for k in (1, 2):
        g = grid_fn(k)
        r = g.nodes
        st = EvolutionState(0.0, g, _smooth(r), Boundary.origin(),
                            Boundary.far_field(_smooth_r(r[-1])))
        F = RadialOperator.for_state(st)(st.U)
        exact = np.empty_like(r)
        exact[1:] = geo.rhs_radial(r[1:], _smooth_r(r[1:]), _smooth_rr(r[1:]))
        exact[0] = 3 * _smooth_rr(0.0)
        m = (r >= 0.5) & (r <= 9.5)
        errs.append(np.max(np.abs(F - exact)[m]))
    assert errs[0] / errs[1] > 3.5


def test_origin_row_is_three_q0():
    st = _uniform_state()
    op = RadialOperator.for_state(st)
    p, q = op.derivatives(st.U)
    assert p[0] == -0.5
    assert op(st.U)[0] == pytest.approx(3 * q[0])
    # one-sided ghost relation: first order, error h U_rrr(0) / 3
    assert q[0] == pytest.approx(_smooth_rr(0.0), abs=0.02)


def test_jacobian_matches_finite_differences():
    st = _uniform_state(r_max=2.0, dr=0.1)
    op = RadialOperator.for_state(st)
    U = np.array(st.U)
    ab = op.jacobian_banded(U)
    n = U.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1e-6
        J[:, j] = (op(U + e) - op(U - e)) / 2e-6
    dense = np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)
    assert np.allclose(dense, J, atol=1e-5)


def test_centered_scheme_monotone_on_uniform_mesh():
    st = _uniform_state()
    assert RadialOperator.for_state(st).min_offdiagonal(st.U) >= 0


# -- stepping -----------------------------------------------------------------------


def test_step_rejects_unstable_dt():
    st = _uniform_state()
    bound = RadialOperator.for_state(st).stable_dt(st.U)
    with pytest.raises(UsageError):
        step(st, 2 * bound)
    assert step(st, bound).t == pytest.approx(bound)


def test_evolve_hits_marks_exactly():
    st = _uniform_state(r_max=2.0, dr=0.05)
    seen = []
    evolve(st, 0.01, observer=lambda s: seen.append(s.t), times=(0.003, 0.0071))
    assert seen == [0.003, 0.0071, 0.01]


def test_evolve_rejects_bad_arguments():
    st = _uniform_state(r_max=2.0, dr=0.05)
    with pytest.raises(UsageError):
        evolve(st, 1.0, method="euler")
    with pytest.raises(UsageError):
        evolve(st.with_values(1.0, st.U), 0.5)


def test_blowup_is_reported():
    st = _uniform_state(r_max=2.0, dr=0.05)
    op = RadialOperator.for_state(st)

    class Broken:
        grid = op.grid

        def __call__(self, U):
            return np.full_like(U, np.nan)

        def stable_dt(self, U, safety=0.4):
            return 1e-3

    with pytest.raises(BlowupError):
        evolve(st, 0.01, op=Broken())


def test_rosenbrock_agrees_with_explicit():
    st = _uniform_state(r_max=4.0, dr=0.04)
    a = evolve(st, 0.2, method="explicit")
    b = evolve(st, 0.2, method="rosenbrock", tol=1e-9)
    assert np.max(np.abs(a.U - b.U)) < 1e-6


def test_rosenbrock_step_error_shrinks_quadratically():
    st = _uniform_state(r_max=4.0, dr=0.04)
    op = RadialOperator.for_state(st)
    e1 = rosenbrock_step(op, np.array(st.U), 1e-3)[1]
    e2 = rosenbrock_step(op, np.array(st.U), 5e-4)[1]
    assert 3.0 < e1 / e2 < 5.0


def test_translation_invariance_explicit():
    st = _uniform_state(r_max=4.0, dr=0.04)
    op = RadialOperator.for_state(st)
    a = evolve(st, 0.05, op=op)
    # same step sequence: the stability bound does not depend on U + c
    b = evolve(st.with_values(0.0, st.U + 37.5), 0.05, op=op)
    assert np.max(np.abs(b.U - a.U - 37.5)) <= 64 * np.finfo(float).eps * 40


# -- comparison ---------------------------------------------------------------------


def test_comparison_constant_shift_is_preserved():
    st = _uniform_state()
    for variant in ("centered", "downwind"):
        rep = check_comparison(st, st.U + 1.0, 0.1, variant=variant)
        assert rep.passed
        assert rep.entries[0].measured == pytest.approx(1.0, abs=1e-9)


def test_comparison_negative_control():
    st = _uniform_state()
    V0 = np.array(st.U)
    V0[0] += 1e-3
    assert check_comparison(st, V0, 0.01, variant="centered").passed
    rep = check_comparison(st, V0, 0.01, variant="downwind")
    assert not rep.passed
    assert rep.entries[0].node == 1


def test_comparison_requires_ordered_data():
    st = _uniform_state()
    with pytest.raises(UsageError):
        check_comparison(st, st.U - 1e-3, 0.01)


# -- initial data -----------------------------------------------------------------


def test_initial_data_parse():
    assert InitialData.parse("bump:0.5,5,1").params == (0.5, 5.0, 1.0)
    assert InitialData.parse("steepen:1.5").label() == "steepen:1.5"
    for bad in ("bump:1,2", "steepen:0.5", "wave:1", "bump:a,b,c", "custom"):
        with pytest.raises(ConfigError):
            InitialData.parse(bad)


def test_steepened_data_has_steeper_slope(traj):
    r = np.linspace(0, 20, 201)
    U = InitialData.steepen(1.5).sample(r, traj.phi)
    assert U[0] == traj.phi(r)[0]
    assert np.all(np.diff(U) <= np.diff(traj.phi(r)) + 1e-15)


# -- rotating solution on [0, r_max] -------------------------------------------------


@pytest.fixture(scope="module")
def reference(traj):
    return DiscreteReference.compute(traj, cauchy_grid(50.0))


def test_discrete_rotating_state_close_to_continuum(traj, reference):
    assert abs(reference.lam_h - traj.lam) <= 1e-6
    r = reference.op.grid.nodes
    assert np.max(np.abs(reference.phi_h - traj.phi(r))) <= 1e-4
    F = reference.op(reference.phi_h)
    assert np.max(np.abs(F - reference.lam_h)) <= 1e-10


def test_steady_drift_budget_and_refinement(traj):
    coarse, slope_c = steady_drift(traj, cauchy_grid(50.0), t_end=10.0)
    fine, slope_f = steady_drift(traj, cauchy_grid(50.0, refine=2), t_end=10.0)
    assert slope_c <= 1e-6 and slope_f <= 1e-6
    assert fine <= 1e-6
    assert coarse / fine >= 3.0


def test_gradient_ordering_equality_case(traj, reference):
    # s = 1 from the discrete rotating state: U_r - Phi_h_r stays at roundoff
    rep = check_gradient_ordering(traj, s=1.0, t_end=2.0, ref=reference, base="discrete")
    assert rep.passed
    assert rep.series[:, 1].max() <= 1e-10


def test_gradient_ordering_short_run(traj, reference):
    rep = check_gradient_ordering(traj, s=1.5, t_end=5.0, ref=reference)
    assert rep.passed, rep.summary()


def test_cauchy_state_uses_profile_slope(traj):
    g = cauchy_grid(30.0)
    st = cauchy_state(traj, g, InitialData.bump(0.5, 5.0, 1.0))
    assert st.right.slope == pytest.approx(float(traj.phi_r(np.array([30.0]))[0]))


# -- curvature equation ----------------------------------------------------------------


def test_curvature_residual_needs_three_snapshots():
    x = np.linspace(0, 1, 20)
    with pytest.raises(UsageError):
        curvature_equation_residual([0.0, 0.1], x, np.zeros((2, 20)))
    with pytest.raises(UsageError):
        curvature_equation_residual([0.0, 0.1, 0.3], x, np.zeros((3, 20)))


def test_steady_curvature_residual(traj):
    assert steady_curvature_residual(traj) <= 1e-5


# -- annulus --------------------------------------------------------------------------


def test_annulus_rejects_small_radius(traj):
    g = annulus_grid(5.0)
    U0 = annulus_initial_data(traj.phi_r, g)
    with pytest.raises(ConfigError):
        evolve_annulus(1.0, U0)
    with pytest.raises(ConfigError):
        evolve_annulus(5.0, U0, grid=g, t_max=20.0)


def test_annulus_initial_data_slopes(traj):
    g = annulus_grid(10.0)
    U0 = annulus_initial_data(traj.phi_r, g).sample(g.nodes)
    r = g.nodes
    assert abs(U0[1] - U0[0]) / (r[1] - r[0]) < 1e-2
    assert np.all(np.diff(U0) <= 0)


def test_annulus_rotating_wave_small_radius(traj):
    g = annulus_grid(5.0)
    res = evolve_annulus(5.0, annulus_initial_data(traj.phi_r, g), grid=g)
    assert res.converged and res.mismatch <= 1e-4
    # at R = 5 the wave turns faster than the half-line spiral (lambda_R > lambda)
    assert abs(res.lambda_R - traj.lam) / traj.lam < 0.1
    assert res.lambda_R <= res.lambda_hat
    d = res.to_dict(traj.lam)
    assert d["relative_error"] == pytest.approx((res.lambda_R - traj.lam) / traj.lam)
    assert d["n_nodes"] == len(g)


def test_run_stats_counts_steps():
    st = _uniform_state(r_max=2.0, dr=0.05)
    stats = RunStats()
    evolve(st, 0.05, method="rosenbrock", stats=stats, tol=1e-7)
    assert stats.steps > 0 and stats.max_rate > 0
