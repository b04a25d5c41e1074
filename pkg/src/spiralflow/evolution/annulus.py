"""Rotating waves on the annulus [1/R, R] with zero-slope conditions at both ends."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize_scalar

from ..errors import ConfigError, NotConverged
from ..geometry import Grid, circle_lambda_hat
from .initial import InitialData
from .scheme import Boundary, EvolutionState, RadialOperator
from .solver import RunStats, evolve

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class RotatingWaveResult:
    R: float
    T_R: float
    lambda_R: float
    converged: bool
    profile_R: np.ndarray
    grid: Grid
    mismatch: float
    lambda_hat: float
    t_window: float
    t_end: float
    steps: int

    def to_dict(self, lambda_star=None) -> dict:
        d = {
            "R": self.R,
            "T_R": self.T_R,
            "lambda_R": self.lambda_R,
            "lambda_star_ref": lambda_star,
            "converged": self.converged,
            "shift_mismatch": self.mismatch,
            "lambda_hat": self.lambda_hat,
            "t_window_start": self.t_window,
            "t_end": self.t_end,
            "steps": self.steps,
            "n_nodes": len(self.grid),
        }
        if lambda_star is not None:
            d["relative_error"] = (self.lambda_R - lambda_star) / lambda_star
        return d


def annulus_grid(R, rel=0.02, dr_max=0.04) -> Grid:
    return Grid.annulus(1.0 / R, R, rel=rel, dr_max=dr_max)


def annulus_initial_data(phi_r, grid: Grid, inner_width=0.5, outer_width=2.0) -> InitialData:
    """Profile slope tapered smoothly to zero at both ends, integrated to U0.

    The result is nonincreasing with zero slope at r = 1/R and r = R.
    """
    r = grid.nodes
    taper = (1.0 - np.exp(-(((r - r[0]) / inner_width) ** 2))) * (
        1.0 - np.exp(-(((r[-1] - r) / outer_width) ** 2))
    )
    ur = phi_r(r) * taper
    U0 = np.concatenate([[0.0], np.cumsum(0.5 * (ur[1:] + ur[:-1]) * np.diff(r))])
    return InitialData.custom(U0)


def evolve_annulus(
    R: float,
    U0: InitialData,
    t_max: float = 400.0,
    grid: Optional[Grid] = None,
    tol: float = 1e-5,
    transient_periods: float = 5.0,
    mismatch_tol: float = 1e-4,
    lambda_hat: Optional[float] = None,
    dt_max: float = 0.5,
) -> RotatingWaveResult:
    """Evolve on the annulus and detect the rotation period.

    The shift mismatch m(T) = max_r |U(t0 + T, r) - U(t0, r) - 2 pi| is
    minimised by golden-section search, with U(t) interpolated between
    accepted steps by cubic Hermite splines.  The window start t0 is placed
    as late as the run allows and must lie beyond ``transient_periods``
    periods of the a-priori estimate 2 pi / lambda_hat.
    """
    if not R > 1:
        raise ConfigError("annulus needs R > 1")
    if grid is None:
        grid = annulus_grid(R)
    if lambda_hat is None:
        lambda_hat = circle_lambda_hat()[0]
    T_est = TWO_PI / lambda_hat
    # periods are at most 2 pi / (1/4); keep a little more than that in memory
    span = 1.3 * TWO_PI / 0.25
    if t_max < transient_periods * T_est + span:
        raise ConfigError("t_max too short for the transient plus one detection window")

    state = EvolutionState(0.0, grid, U0.sample(grid.nodes), Boundary.neumann(), Boundary.neumann())
    op = RadialOperator.for_state(state)
    hist = deque()

    def keep(s):
        hist.append((s.t, s.U.copy()))
        while hist and hist[0][0] < s.t - span:
            hist.popleft()

    stats = RunStats()
    final = evolve(state, t_max, observer=keep, method="rosenbrock", tol=tol, op=op,
                   every_step=True, stats=stats, dt_max=dt_max)
    ts = np.array([h[0] for h in hist])
    Us = np.array([h[1] for h in hist])
    _, idx = np.unique(ts, return_index=True)
    ts, Us = ts[idx], Us[idx]
    dUs = np.array([op(u) for u in Us])
    spline = CubicHermiteSpline(ts, Us, dUs, axis=0)

    # period estimate from the mean rotation rate over the stored window
    rate = float(np.mean(Us[-1] - Us[0]) / (ts[-1] - ts[0]))
    T_rate = TWO_PI / rate
    lo, hi = 0.95 * T_rate, 1.05 * T_rate
    t0 = final.t - hi
    best = None
    if t0 < max(ts[0], transient_periods * T_est):
        raise NotConverged("run too short for the detection window", best=best)
    U_t0 = spline(t0)

    def mismatch(T):
        return float(np.max(np.abs(spline(t0 + T) - U_t0 - TWO_PI)))

    opt = minimize_scalar(mismatch, bracket=(lo, T_rate, hi), method="golden",
                          options={"xtol": 1e-10})
    T_R = float(opt.x)
    m = mismatch(T_R)
    shape = spline(t0 + T_R)
    result = RotatingWaveResult(
        R=float(R), T_R=T_R, lambda_R=TWO_PI / T_R, converged=m <= mismatch_tol,
        profile_R=shape - shape[0], grid=grid, mismatch=m, lambda_hat=float(lambda_hat),
        t_window=t0, t_end=final.t, steps=stats.steps,
    )
    if not result.converged:
        raise NotConverged(f"shift mismatch {m:.3g} above {mismatch_tol:.3g}", best=result)
    return result
