"""Rotating steady state U = lam*t + Phi(r) by shooting on the profile ODE.

Near the origin the profile is integrated in the radial chart from the Taylor
seed Phi_r = -1/2 + (lam/3) r.  Beyond ``r_switch`` it continues in the log
chart as the first-order equation v_x = f(v, x), v = r Phi_r.  For the right
lam the solution hugs the nullcline v0(x) from below; any other lam departs
either upward (v is pushed to 0) or downward (v runs off to -infinity), and
bisection on that dichotomy pins down lam.

Far out the forward pass is exponentially unstable: even at a bracket width
of 1e-11 it leaves the nullcline around x ~ 2.  The far part of the profile is
therefore taken from the slow branch, integrated backward from the horizon
in the offset variable d = v0 - v where it is strongly attracting.  The two
pieces are joined at ``x_join`` and the join mismatch is reported.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import geometry as geo
from .errors import (
    BracketError,
    ConfigError,
    DomainError,
    FitError,
    ProfileInvariantError,
    ShootingUnresolved,
    StiffnessError,
    UsageError,
)
from .report import VerificationReport

__all__ = [
    "ShootingConfig",
    "Classification",
    "ShootingOutcome",
    "MatchedTrajectory",
    "NullclineBand",
    "ProfileSolution",
    "phi_rr_from_ode",
    "shoot",
    "find_lambda",
    "matched_trajectory",
    "build_profile",
    "fit_asymptotic_constant",
    "residual_decay_slope",
    "nullcline_band",
    "verify_profile",
]


@dataclass(frozen=True)
class ShootingConfig:
    lambda_lo: float = 0.25
    lambda_hi: float = 0.5
    eps0: float = 1e-4
    r_switch: float = 1.0
    x_max: float = 12.0
    rtol: float = 1e-10
    atol: float = 1e-12
    lambda_tol: float = 1e-11
    x_join: float = 1.5
    match_tol: float = 1e-6

    def __post_init__(self):
        if not (0 < self.lambda_lo < self.lambda_hi):
            raise ConfigError("need 0 < lambda_lo < lambda_hi")
        if not (0 < self.eps0 < self.r_switch):
            raise ConfigError("need 0 < eps0 < r_switch")
        if not (self.x_max > np.log(self.r_switch)):
            raise ConfigError("need x_max > ln(r_switch)")
        if not (np.log(self.r_switch) <= self.x_join < self.x_max - np.log(10.0)):
            raise ConfigError("need ln(r_switch) <= x_join < x_max - ln 10")
        if not (self.rtol > 0 and self.atol > 0 and self.lambda_tol > 0 and self.match_tol > 0):
            raise ConfigError("tolerances must be positive")

    def refined(self) -> "ShootingConfig":
        """Same problem with every step control halved."""
        return replace(
            self, eps0=self.eps0 / 2, rtol=self.rtol / 2, atol=self.atol / 2,
            lambda_tol=self.lambda_tol / 2,
        )


class Classification(enum.Enum):
    ESCAPE_ABOVE = "escape-above"
    DIVE_BELOW = "dive-below"
    MATCHED = "matched"


@dataclass(frozen=True, eq=False)
class ShootingOutcome:
    lambda_trial: float
    classification: Classification
    x: np.ndarray
    v: np.ndarray
    exit_x: float
    join_mismatch: float = float("nan")


def phi_rr_from_ode(r, p, lam):
    """Solve rhs_radial(r, p, q) = lam for q.  At r = 0 returns lam/3."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    s = 1.0 + (r * p) ** 2
    safe = np.where(r > 0, r, 1.0)
    q = (lam * safe * s - s**1.5 - p * (2.0 + (safe * p) ** 2)) / safe
    out = np.where(r > 0, q, lam / 3.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Forward integration from the origin
# ---------------------------------------------------------------------------


def _check_ivp(sol, what):
    if sol.status == -1:
        x = sol.t[-1] if sol.t.size else None
        y = sol.y[:, -1] if sol.y.size else None
        raise StiffnessError(f"{what}: {sol.message}", x=x, state=y)


def _radial_leg(lam, cfg, dense=False):
    e = cfg.eps0
    y0 = [-0.5 + lam / 3.0 * e, -0.5 * e + lam / 6.0 * e * e]

    def rhs(r, y):
        return [phi_rr_from_ode(r, y[0], lam), y[0]]

    sol = solve_ivp(rhs, (e, cfg.r_switch), y0, method="DOP853",
                    rtol=cfg.rtol, atol=cfg.atol, dense_output=dense)
    _check_ivp(sol, "radial leg")
    return sol


def _escape_event(x, y, lam):
    return y[0]


def _dive_event(x, y, lam):
    return y[0] - (3.0 * (-lam * np.exp(x) - lam) - 1.0)


_escape_event.terminal = True
_dive_event.terminal = True


def _log_leg(lam, cfg, v_start, phi_start, x_end, dense=False, events=True):
    def rhs(x, y, lam):
        return [geo.ode_f(y[0], x, lam), y[0]]

    sol = solve_ivp(
        rhs, (np.log(cfg.r_switch), x_end), [v_start, phi_start], method="DOP853",
        rtol=cfg.rtol, atol=cfg.atol, dense_output=dense,
        events=[_escape_event, _dive_event] if events else None, args=(lam,),
    )
    _check_ivp(sol, "log leg")
    return sol


def _forward(lam, cfg, x_end=None, dense=False):
    rad = _radial_leg(lam, cfg, dense=dense)
    p1, phi1 = rad.y[:, -1]
    log = _log_leg(lam, cfg, cfg.r_switch * p1, phi1,
                   cfg.x_max if x_end is None else x_end, dense=dense)
    return rad, log


def _classify(log):
    if log.t_events[0].size:
        return Classification.ESCAPE_ABOVE, float(log.t_events[0][0])
    if log.t_events[1].size:
        return Classification.DIVE_BELOW, float(log.t_events[1][0])
    return None, float(log.t[-1])


def _forward_class(lam, cfg):
    _, log = _forward(lam, cfg)
    c, x = _classify(log)
    if c is None:
        raise ShootingUnresolved(f"lambda={lam!r}: no threshold crossed before x_max")
    return c


# ---------------------------------------------------------------------------
# Slow branch near the nullcline
# ---------------------------------------------------------------------------


def _slow_branch(lam, cfg):
    """Backward integration of d = v0 - v from the horizon down to x_join.

    The start value is the quasi-steady offset -(v0)_x / f_w(v0), which is
    where d relaxes to within an O(e^{-3x}) layer anyway.
    """

    def rhs(x, y):
        v0 = geo.nullcline_v0(x, lam)
        return [geo.nullcline_v0_dx(x, lam) - geo.ode_f_offset(y[0], x, lam, v0)]

    def jac(x, y):
        v0 = geo.nullcline_v0(x, lam)
        return [[geo.ode_f_dw(v0 - y[0], x, lam)]]

    xm = cfg.x_max
    d0 = -geo.nullcline_v0_dx(xm, lam) / geo.ode_f_dw(geo.nullcline_v0(xm, lam), xm, lam)
    sol = solve_ivp(rhs, (xm, cfg.x_join), [d0], method="Radau", rtol=cfg.rtol,
                    atol=1e-30, jac=jac, dense_output=True, first_step=1e-3)
    _check_ivp(sol, "slow branch")
    return sol


@dataclass(frozen=True, eq=False)
class MatchedTrajectory:
    """Forward solution from the origin joined to the slow branch at ``x_join``.

    Exposes dense evaluators for Phi_r, Phi and d = v0 - v.
    """

    lam: float
    cfg: ShootingConfig
    radial: object
    forward: object
    slow: object
    phi_far: object
    join_mismatch: float

    def d(self, x):
        return self.slow.sol(np.asarray(x, dtype=float))[0]

    def v(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        near = x <= self.cfg.x_join
        if np.any(near):
            out[near] = self.forward.sol(x[near])[0]
        if np.any(~near):
            out[~near] = geo.nullcline_v0(x[~near], self.lam) - self.d(x[~near])
        return out

    def _split(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(np.log(np.maximum(r, 1e-300)) > self.cfg.x_max):
            raise DomainError("radius outside [0, exp(x_max)]")
        e = self.cfg.eps0
        rj = np.exp(self.cfg.x_join)
        return r, r < e, (r >= e) & (r <= self.cfg.r_switch), (r > self.cfg.r_switch) & (r <= rj), r > rj

    def phi_r(self, r):
        r, a, b, c, d = self._split(r)
        out = np.empty_like(r)
        out[a] = -0.5 + self.lam / 3.0 * r[a]
        if b.any():
            out[b] = self.radial.sol(r[b])[0]
        if c.any():
            out[c] = self.forward.sol(np.log(r[c]))[0] / r[c]
        if d.any():
            out[d] = self.v(np.log(r[d])) / r[d]
        return out

    def phi(self, r):
        r, a, b, c, d = self._split(r)
        out = np.empty_like(r)
        out[a] = -0.5 * r[a] + self.lam / 6.0 * r[a] ** 2
        if b.any():
            out[b] = self.radial.sol(r[b])[1]
        if c.any():
            out[c] = self.forward.sol(np.log(r[c]))[1]
        if d.any():
            out[d] = self.phi_far.sol(np.log(r[d]))[0]
        return out


def matched_trajectory(lam, cfg: ShootingConfig = ShootingConfig()) -> MatchedTrajectory:
    rad = _radial_leg(lam, cfg, dense=True)
    p1, phi1 = rad.y[:, -1]
    fwd = _log_leg(lam, cfg, cfg.r_switch * p1, phi1, cfg.x_join, dense=True, events=False)
    slow = _slow_branch(lam, cfg)
    v_f = fwd.y[0, -1]
    v_s = geo.nullcline_v0(cfg.x_join, lam) - slow.y[0, -1]
    mismatch = abs(v_f - v_s) / abs(v_s)

    def dphi(x, y):
        return [geo.nullcline_v0(x, lam) - slow.sol(x)[0]]

    far = solve_ivp(dphi, (cfg.x_join, cfg.x_max), [fwd.y[1, -1]], method="DOP853",
                    rtol=1e-13, atol=1e-13, dense_output=True)
    _check_ivp(far, "far quadrature")
    return MatchedTrajectory(lam, cfg, rad, fwd, slow, far, float(mismatch))


def shoot(lambda_trial, cfg: ShootingConfig = ShootingConfig()) -> ShootingOutcome:
    """Classify one trial angular velocity.

    The forward pass from the origin decides escape versus dive.  If the
    forward solution agrees with the slow branch at ``x_join`` to
    ``match_tol`` (relative) and the slow branch stays within ``match_tol``
    of v0 over the last decade of x, the trial is Matched and the returned
    trajectory is the joined one, running to ``x_max``.
    """
    if not lambda_trial > 0:
        raise DomainError("lambda_trial must be positive")
    _, log = _forward(lambda_trial, cfg)
    cls, exit_x = _classify(log)
    mismatch = float("nan")
    if exit_x >= cfg.x_join:
        traj = matched_trajectory(lambda_trial, cfg)
        mismatch = traj.join_mismatch
        band = nullcline_band(traj)
        if mismatch <= cfg.match_tol and band.max_relative_gap <= cfg.match_tol:
            xs = np.concatenate([traj.forward.t, traj.slow.t[::-1][1:]])
            return ShootingOutcome(lambda_trial, Classification.MATCHED, xs, traj.v(xs),
                                   cfg.x_max, mismatch)
    if cls is None:
        raise ShootingUnresolved(f"lambda={lambda_trial!r}: no classification before x_max")
    return ShootingOutcome(lambda_trial, cls, log.t.copy(), log.y[0].copy(), exit_x, mismatch)


@dataclass(frozen=True)
class BisectionResult:
    lam: float
    lo: float
    hi: float
    iterations: int
    lo_class: Classification


def bisect_lambda(cfg: ShootingConfig = ShootingConfig()) -> BisectionResult:
    """Bisection on the raw forward classification, oriented at the bracket ends."""
    lo, hi = cfg.lambda_lo, cfg.lambda_hi
    c_lo = _forward_class(lo, cfg)
    c_hi = _forward_class(hi, cfg)
    if c_lo == c_hi:
        raise BracketError(f"both bracket ends classify as {c_lo.value}")
    n = 0
    while hi - lo > cfg.lambda_tol:
        mid = 0.5 * (lo + hi)
        if _forward_class(mid, cfg) == c_lo:
            lo = mid
        else:
            hi = mid
        n += 1
    return BisectionResult(0.5 * (lo + hi), lo, hi, n, c_lo)


def find_lambda(cfg: ShootingConfig = ShootingConfig()) -> float:
    return bisect_lambda(cfg).lam


# ---------------------------------------------------------------------------
# Assembled profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NullclineBand:
    """d = v0 - v sampled over the last decade of x, with the fitted band scale."""

    x: np.ndarray
    d: np.ndarray
    v0: np.ndarray
    mu: float

    @property
    def min_gap(self) -> float:
        return float(self.d.min())

    @property
    def max_relative_gap(self) -> float:
        return float(np.max(np.abs(self.d) / np.abs(self.v0)))

    @property
    def max_band_ratio(self) -> float:
        return float(np.max(self.d * np.exp(1.5 * self.x)) / self.mu)


def nullcline_band(traj: MatchedTrajectory, n: int = 2001) -> NullclineBand:
    """Sample the slow branch on [x_max - ln 10, x_max] and fit mu.

    mu is the smallest constant with d <= mu e^{-3x/2} on the first half of
    the decade; the band is then checked out of sample on the whole decade.
    """
    cfg = traj.cfg
    x = np.linspace(cfg.x_max - np.log(10.0), cfg.x_max, n)
    d = traj.d(x)
    mu = float(np.max((d * np.exp(1.5 * x))[: n // 2 + 1]))
    return NullclineBand(x, d, geo.nullcline_v0(x, traj.lam), mu if mu > 0 else float("nan"))


@dataclass(frozen=True, eq=False)
class ProfileSolution:
    lam: float
    grid: geo.Grid
    phi: np.ndarray
    phi_r: np.ndarray
    phi_rr: np.ndarray
    kappa: np.ndarray
    residuals: np.ndarray
    band: Optional[NullclineBand] = None
    join_mismatch: float = float("nan")
    a: Optional[float] = None
    C_est: Optional[float] = None

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def r_max(self) -> float:
        return float(self.grid.nodes[-1])

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "a": self.a,
            "C_est": self.C_est,
            "r_max": self.r_max,
            "join_mismatch": self.join_mismatch,
            "band_mu": None if self.band is None else self.band.mu,
        }


def _invariant_violations(lam, r, phi_r, kappa, tol=1e-12):
    """First violated profile inequality, as (name, node), or None."""
    tests = [
        ("phi_r >= -1/2", phi_r + 0.5 < -tol),
        ("phi_r <= -lambda", phi_r + lam > tol),
        ("phi_r nondecreasing", np.concatenate([[False], np.diff(phi_r) < -tol])),
        ("kappa >= -1", kappa + 1.0 < -tol),
        ("kappa <= 0", kappa > tol),
        ("kappa nondecreasing", np.concatenate([[False], np.diff(kappa) < -tol])),
        ("1+kappa <= lambda r", 1.0 + kappa - lam * r > tol),
    ]
    for name, bad in tests:
        idx = np.flatnonzero(bad)
        if idx.size:
            return name, int(idx[0])
    return None


def build_profile(
    lam: float,
    r_max: float = 100.0,
    cfg: ShootingConfig = ShootingConfig(),
    grid: Optional[geo.Grid] = None,
    fit: bool = True,
) -> ProfileSolution:
    """Sample the steady profile on ``grid`` (default: graded mesh to r_max).

    Phi is normalised by Phi(0) = 0, Phi_rr comes from the ODE algebraically
    and kappa from :func:`geometry.curvature`.  The asymptotic constant is
    fitted when r_max >= 50.
    """
    if grid is None:
        grid = geo.Grid.radial_graded(r_max)
    if not grid.includes_origin:
        raise UsageError("profile grid must include the origin")
    r = grid.nodes
    if np.log(r[-1]) > cfg.x_max:
        raise ConfigError("r_max exceeds exp(x_max)")
    traj = matched_trajectory(lam, cfg)
    if traj.join_mismatch > cfg.match_tol:
        raise ProfileInvariantError(
            f"forward and slow branches disagree at x_join (rel {traj.join_mismatch:.3g})",
            check="matching", node=None,
        )
    phi = traj.phi(r)
    phi_r = traj.phi_r(r)
    phi_rr = phi_rr_from_ode(r, phi_r, lam)
    kappa = geo.curvature(r, phi_r, phi_rr)
    # exact values at the origin node
    phi[0], phi_r[0], kappa[0] = 0.0, -0.5, -1.0
    res = np.empty_like(r)
    res[1:] = np.abs(geo.rhs_radial(r[1:], phi_r[1:], phi_rr[1:]) - lam)
    res[0] = abs(geo.origin_compatibility(phi_r[0], phi_rr[0])[1] - lam)
    bad = _invariant_violations(lam, r, phi_r, kappa)
    if bad is not None:
        raise ProfileInvariantError(f"profile violates {bad[0]} at node {bad[1]}",
                                    check=bad[0], node=bad[1])
    prof = ProfileSolution(lam, grid, phi, phi_r, phi_rr, kappa, res,
                           nullcline_band(traj), traj.join_mismatch)
    if fit and r[-1] >= 50:
        a, c_est = fit_asymptotic_constant(prof)
        prof = replace(prof, a=a, C_est=c_est)
    return prof


def _tail_g(profile):
    r = profile.r
    return r, profile.phi + profile.lam * r + profile.lam * np.log1p(r)


def fit_asymptotic_constant(profile: ProfileSolution, tail: float = 0.2):
    """Estimate a = lim Phi + lam r + lam ln(1+r) and the constant C.

    Polynomials in s = 1/(1+r) of degree 3 and 4 are fitted by least squares
    over the outer ``tail`` fraction of [0, r_max]; their intercepts are the
    Richardson extrapolants to s = 0 and must agree.
    """
    r, g = _tail_g(profile)
    if r[-1] < 50:
        raise UsageError("asymptotic fit needs r_max >= 50")
    m = r >= (1.0 - tail) * r[-1]
    s = 1.0 / (1.0 + r[m])
    gm = g[m]
    scale = max(1.0, float(np.max(np.abs(gm))))
    dg = np.diff(gm)
    dg = dg[np.abs(dg) > 1e-13 * scale]
    if dg.size and np.count_nonzero(np.diff(np.sign(dg))) > 2:
        raise FitError("oscillating tail: Phi + lam r + lam ln(1+r) is not monotone")
    ests = [np.polynomial.polynomial.polyfit(s, gm, deg)[0] for deg in (3, 4)]
    if abs(ests[1] - ests[0]) > 1e-7 * scale:
        raise FitError(f"extrapolants disagree: {ests[0]!r} vs {ests[1]!r}")
    a = float(ests[1])
    c_est = float(np.max((1.0 + r) * np.abs(g - a)))
    return a, c_est


def residual_decay_slope(profile: ProfileSolution, a: Optional[float] = None) -> float:
    """Log-log slope of |Phi + lam r + lam ln(1+r) - a| against 1+r over the outer decade."""
    if a is None:
        a = profile.a if profile.a is not None else fit_asymptotic_constant(profile)[0]
    r, g = _tail_g(profile)
    m = r >= r[-1] / 10.0
    e = np.abs(g[m] - a)
    if np.any(e <= 0):
        return float("-inf")
    return float(np.polyfit(np.log1p(r[m]), np.log(e), 1)[0])


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

_A_STEADY = "steady-state theorem: properties of the profile"
_A_CURV = "curvature sign and monotonicity proposition"
_A_IDENT = "curvature identity 1+kappa = lambda r / sqrt(1+r^2 Phi_r^2)"
_A_ODE = "profile ODE (steady form of the main equation)"
_A_ASYMPT = "far-field expansion Phi_r = -lambda - lambda/r + O(1/r^2)"
_A_BAND = "nullcline band lemma v0 >= v >= v0 - mu e^{-3x/2}"
_A_FIT = "asymptotic constant a with |Phi + lambda r + lambda ln(1+r) - a| <= C/(1+r)"


def _first_bad(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def verify_profile(profile: ProfileSolution, mono_tol: float = 1e-12) -> VerificationReport:
    """Check every proven inequality and identity on the sampled profile."""
    rep = VerificationReport()
    lam, r = profile.lam, profile.r
    pr, prr, k = profile.phi_r, profile.phi_rr, profile.kappa
    rmax = profile.r_max

    rep.add("phi(0) = 0", profile.phi[0] == 0.0, abs(profile.phi[0]), 0.0, "normalisation of Phi")
    rep.add("phi_r(0) = -1/2", pr[0] == -0.5, abs(pr[0] + 0.5), 0.0, _A_STEADY)
    rep.add("kappa(0) = -1", k[0] == -1.0, abs(k[0] + 1.0), 0.0, _A_CURV)

    def ineq(name, viol, tol, anchor):
        worst = float(np.max(viol))
        rep.add(name, worst <= tol, max(worst, 0.0) + 0.0, tol, anchor,
                node=_first_bad(viol > tol))

    ineq("phi_r >= -1/2", -(pr + 0.5), mono_tol, _A_STEADY)
    ineq("phi_r <= -lambda", pr + lam, mono_tol, _A_STEADY)
    ineq("phi_rr >= 0", -prr, mono_tol, _A_STEADY)
    ineq("phi_r nondecreasing", np.concatenate([[0.0], -np.diff(pr)]), mono_tol, _A_STEADY)
    ineq("kappa >= -1", -(k + 1.0), mono_tol, _A_CURV)
    ineq("kappa <= 0", k, mono_tol, _A_CURV)
    ineq("kappa nondecreasing", np.concatenate([[0.0], -np.diff(k)]), mono_tol, _A_CURV)
    ineq("1+kappa >= 0", -(1.0 + k), mono_tol, _A_CURV)
    ineq("1+kappa <= lambda r", 1.0 + k - lam * r, mono_tol, _A_CURV)

    ident = np.abs(1.0 + k - lam * r / np.sqrt(1.0 + (r * pr) ** 2))
    rep.add("curvature identity", ident.max() <= 1e-8, ident.max(), 1e-8, _A_IDENT,
            node=_first_bad(ident > 1e-8))
    rep.add("ode residual", profile.residuals.max() <= 1e-8, profile.residuals.max(), 1e-8,
            _A_ODE, node=_first_bad(profile.residuals > 1e-8))
    far = abs(pr[-1] + lam)
    rep.add("phi_r(r_max) near -lambda", far <= 2 * lam / rmax, far, 2 * lam / rmax, _A_ASYMPT)
    rep.add("kappa(r_max) near 0", abs(k[-1]) <= 2 / rmax, abs(k[-1]), 2 / rmax, _A_CURV)

    if profile.band is not None:
        b = profile.band
        floor = 1e-14 * np.abs(b.v0)
        neg = float(np.max(-b.d / floor))
        rep.add("nullcline band lower (v <= v0)", np.all(b.d >= -floor), max(neg, 0.0) + 0.0, 1.0,
                _A_BAND, note="d measured in units of 1e-14 |v0|")
        ratio = b.max_band_ratio
        ok_mu = bool(np.isfinite(b.mu)) and ratio <= 1.0 + 1e-12
        rep.add("nullcline band upper", ok_mu, ratio, 1.0, _A_BAND,
                note=f"max d e^(3x/2) / mu over the decade, mu = {b.mu:.6g} fitted on its first half")
        rep.add("matched relative gap", b.max_relative_gap <= 1e-6, b.max_relative_gap, 1e-6,
                _A_BAND)
    if profile.a is not None:
        rep.add("C_est finite", np.isfinite(profile.C_est), profile.C_est, float("inf"), _A_FIT)
        slope = residual_decay_slope(profile)
        rep.add("asymptotic residual decay slope", slope <= -0.9, slope, -0.9, _A_FIT)
    return rep
