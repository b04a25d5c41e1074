"""Time integration: explicit SSP2 stepping and a linearly implicit Rosenbrock
stepper for long runs, plus a Newton solver for the discrete rotating state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from ..errors import BlowupError, NumericalError, UsageError
from .scheme import EvolutionState, RadialOperator

__all__ = [
    "step",
    "evolve",
    "rosenbrock_step",
    "discrete_steady_state",
    "RunStats",
]

_GAMMA = 1.0 + 1.0 / np.sqrt(2.0)


def _finite_or_raise(U, t):
    bad = ~np.isfinite(U)
    if bad.any():
        node = int(np.flatnonzero(bad)[0])
        raise BlowupError(f"non-finite value at node {node}, t={t:.6g}", node=node, t=t)


def _ssp2(op, U, dt):
    u1 = U + dt * op(U)
    return 0.5 * U + 0.5 * (u1 + dt * op(u1))


def step(state: EvolutionState, dt: float, op: Optional[RadialOperator] = None,
         check_dt: bool = True) -> EvolutionState:
    """One explicit two-stage strong-stability-preserving step."""
    if op is None:
        op = RadialOperator.for_state(state)
    if not dt > 0:
        raise UsageError("dt must be positive")
    if check_dt:
        bound = op.stable_dt(state.U)
        if dt > bound * (1.0 + 1e-12):
            raise UsageError(f"dt={dt:.3g} exceeds the stability bound {bound:.3g}")
    U = _ssp2(op, state.U, dt)
    t = state.t + dt
    _finite_or_raise(U, t)
    return state.with_values(t, U)


def rosenbrock_step(op: RadialOperator, U, dt):
    """Two-stage L-stable Rosenbrock step (ROS2).

    Returns the new values and the difference to the embedded first-order
    solution, used as the local error estimate.
    """
    ab = -_GAMMA * dt * op.jacobian_banded(U)
    ab[1] += 1.0
    k1 = solve_banded((1, 1), ab, op(U), check_finite=False)
    k2 = solve_banded((1, 1), ab, op(U + dt * k1) - 2.0 * k1, check_finite=False)
    Un = U + dt * (1.5 * k1 + 0.5 * k2)
    err = float(np.max(np.abs(0.5 * dt * (k1 + k2))))
    return Un, err


@dataclass
class RunStats:
    steps: int = 0
    rejected: int = 0
    max_rate: float = 0.0


def evolve(
    state: EvolutionState,
    t_end: float,
    observer: Optional[Callable[[EvolutionState], None]] = None,
    times: Iterable[float] = (),
    method: str = "explicit",
    tol: float = 1e-6,
    dt0: Optional[float] = None,
    safety: float = 0.4,
    op: Optional[RadialOperator] = None,
    every_step: bool = False,
    stats: Optional[RunStats] = None,
    dt_max: float = np.inf,
) -> EvolutionState:
    """Advance ``state`` to ``t_end``.

    ``observer`` is called at each time in ``times`` (hit exactly by clipping
    the step), at ``t_end``, and after every accepted step if ``every_step``.
    ``method="explicit"`` takes SSP2 steps at the stability bound;
    ``method="rosenbrock"`` adapts dt to keep the local error below ``tol``.
    ``dt_max`` caps the adaptive step.  ``stats.max_rate`` records the largest difference quotient
    max|U(t+dt) - U(t)| / dt seen during the run.
    """
    if method not in ("explicit", "rosenbrock"):
        raise UsageError(f"unknown method {method!r}")
    if t_end < state.t:
        raise UsageError("t_end precedes the current time")
    if op is None:
        op = RadialOperator.for_state(state)
    stats = stats if stats is not None else RunStats()
    marks = sorted(t for t in set(float(x) for x in times) if state.t < t <= t_end)
    if not marks or marks[-1] != t_end:
        marks.append(float(t_end))
    t = state.t
    U = np.array(state.U)
    dt = dt0 if dt0 is not None else 1e-4
    for mark in marks:
        while t < mark:
            # land exactly on the mark, avoiding a sliver step just before it
            h_max = mark - t
            if method == "explicit":
                bound = op.stable_dt(U, safety)
                h = h_max if h_max <= 1.001 * bound else bound
                Un = _ssp2(op, U, h)
            else:
                h = min(dt, dt_max, h_max)
                if h_max - h < 1e-3 * h:
                    h = h_max
                Un, err = rosenbrock_step(op, U, h)
                if not np.isfinite(err):
                    err = np.inf
                dt = h * min(4.0, max(0.2, 0.9 * np.sqrt(tol / max(err, 1e-300))))
                if err > tol:
                    stats.rejected += 1
                    if dt < 1e-14:
                        raise BlowupError("time step underflow", t=t)
                    continue
            t_new = mark if h == h_max else t + h
            _finite_or_raise(Un, t_new)
            stats.max_rate = max(stats.max_rate, float(np.max(np.abs(Un - U))) / h)
            U, t = Un, t_new
            stats.steps += 1
            if every_step and observer is not None and t < mark:
                observer(state.with_values(t, U))
        if observer is not None:
            observer(state.with_values(t, U))
    return state.with_values(t, U)


def discrete_steady_state(op: RadialOperator, U_guess, lam_guess, tol=1e-13, max_iter=30):
    """Newton solve of F_h(U) = lam with U[0] = 0.

    Returns ``(U, lam)``: the rotating solution lam t + U of the semi-discrete
    system, which the time steppers preserve up to their own error.
    """
    U = np.array(U_guess, dtype=float)
    U -= U[0]
    lam = float(lam_guess)
    n = U.size
    one = np.ones((n, 1))
    e0 = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, n))
    for _ in range(max_iter):
        res = op(U) - lam
        ab = op.jacobian_banded(U)
        J = sp.diags([ab[2, :-1], ab[1], ab[0, 1:]], [-1, 0, 1], format="csr")
        A = sp.bmat([[J, sp.csr_matrix(-one)], [e0, None]], format="csc")
        d = spsolve(A, -np.concatenate([res, [U[0]]]))
        U += d[:n]
        lam += d[n]
        if not np.all(np.isfinite(U)):
            raise NumericalError("Newton iteration diverged")
        if np.max(np.abs(d)) < tol * max(1.0, np.max(np.abs(U))):
            return U, lam
    raise NumericalError("Newton iteration did not converge")
