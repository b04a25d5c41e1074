"""Pointwise kernels for spirals moving by forced mean curvature V_n = 1 + kappa.

The spiral is the polar graph theta = -U(t, r).  Everything here is a pure,
vectorised function of its arguments: curvature, the right-hand side of the
evolution equation in the radial chart (r) and in the log chart (x = ln r),
the first-order profile ODE v_x = f(v, x) with its nullcline v0, and the
explicit barriers used to bound the angular velocity.

All kernels accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "Chart",
    "Grid",
    "PointState",
    "BarrierParams",
    "curvature",
    "curvature_log",
    "rhs_radial",
    "rhs_log",
    "rhs_radial_partials",
    "to_log_chart",
    "ode_f",
    "ode_f_dw",
    "ode_f_offset",
    "nullcline_discriminant",
    "nullcline_v0",
    "nullcline_v0_dx",
    "nullcline_threshold",
    "origin_compatibility",
    "circle_barrier",
    "cutoff",
    "cutoff_barrier",
    "circle_lambda_hat",
    "h_mu",
    "LOWER_BARRIER",
]


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Chart(enum.Enum):
    RADIAL = "radial"
    LOG = "log"


@dataclass(frozen=True, eq=False)
class Grid:
    """A fixed one-dimensional mesh, strictly increasing.

    ``nodes`` are radii for the radial chart and log-radii for the log chart.
    A radial grid may start at the origin (``includes_origin``).
    """

    nodes: np.ndarray
    chart: Chart = Chart.RADIAL
    includes_origin: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise DomainError("a grid needs at least three nodes")
        if not np.all(np.isfinite(nodes)):
            raise DomainError("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if self.includes_origin:
            if self.chart is not Chart.RADIAL:
                raise DomainError("only a radial grid can include the origin")
            if nodes[0] != 0.0:
                raise DomainError("includes_origin requires nodes[0] == 0")
        elif self.chart is Chart.RADIAL and nodes[0] <= 0.0:
            raise DomainError("radial grid without origin must have r > 0")

    def __len__(self):
        return self.nodes.size

    @property
    def radii(self) -> np.ndarray:
        if self.chart is Chart.LOG:
            return np.exp(self.nodes)
        return self.nodes

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def to_dict(self) -> dict:
        h = self.spacing
        return {
            "chart": self.chart.value,
            "includes_origin": self.includes_origin,
            "n_nodes": int(self.nodes.size),
            "start": float(self.nodes[0]),
            "end": float(self.nodes[-1]),
            "min_spacing": float(h.min()),
            "max_spacing": float(h.max()),
        }

    # -- constructors -----------------------------------------------------

    @classmethod
    def radial_uniform(cls, r_max: float, dr: float) -> "Grid":
        n = int(round(r_max / dr))
        return cls(np.linspace(0.0, r_max, n + 1), Chart.RADIAL, True)

    @classmethod
    def radial_graded(
        cls,
        r_max: float,
        dr_min: float = 1e-3,
        ratio: float = 1.05,
        dr_max: float = 1e-2,
    ) -> "Grid":
        """Geometric grading away from r = 0, then uniform spacing ``dr_max``.

        The first two cells are equal: with a longer second cell the centred
        stencil at r = dr_min gives the origin node a negative weight.
        """
        if not (0 < dr_min <= dr_max and ratio >= 1.0 and r_max > 3 * dr_max):
            raise DomainError("invalid grading parameters")
        nodes = [0.0, dr_min]
        h = dr_min
        while h < dr_max:
            nodes.append(nodes[-1] + h)
            h *= ratio
        start = nodes[-1]
        n = max(1, int(round((r_max - start) / dr_max)))
        nodes.extend(np.linspace(start, r_max, n + 1)[1:])
        return cls(np.array(nodes), Chart.RADIAL, True)

    @classmethod
    def annulus(
        cls, r_in: float, r_out: float, rel: float = 0.01, dr_max: float = 0.02
    ) -> "Grid":
        """Radial grid on [r_in, r_out]: spacing rel*r, capped at ``dr_max``."""
        if not (0 < r_in < r_out):
            raise DomainError("annulus needs 0 < r_in < r_out")
        nodes = [r_in]
        while True:
            h = min(rel * nodes[-1], dr_max)
            if nodes[-1] + 1.5 * h >= r_out:
                break
            nodes.append(nodes[-1] + h)
        nodes.append(r_out)
        return cls(np.array(nodes), Chart.RADIAL, False)

    @classmethod
    def geometric(cls, r_in: float, r_out: float, n: int) -> "Grid":
        """Radial grid whose nodes are uniformly spaced in x = ln r."""
        return cls(np.geomspace(r_in, r_out, n), Chart.RADIAL, False)

    @classmethod
    def log_uniform(cls, x_min: float, x_max: float, n: int) -> "Grid":
        return cls(np.linspace(x_min, x_max, n), Chart.LOG, False)


class PointState(NamedTuple):
    """Radius with the first and second radial derivatives of U there."""

    r: float
    p: float
    q: float


@dataclass(frozen=True)
class BarrierParams:
    """Subsolution -mu*e^x in the log chart and the velocity bound it certifies."""

    mu: float
    alpha: float

    def __post_init__(self):
        if not (self.mu > 0 and self.alpha > 0):
            raise DomainError("barrier parameters must be positive")


LOWER_BARRIER = BarrierParams(mu=1.0 / (2.0 * np.sqrt(2.0)), alpha=0.25)


# ---------------------------------------------------------------------------
# Curvature and evolution right-hand sides
# ---------------------------------------------------------------------------


def curvature(r, p, q):
    """Curvature of the polar graph theta = -U at radius r.

    ``p`` and ``q`` are U_r and U_rr.  At r = 0 this reduces to 2p.
    """
    _check_finite(r, p, q)
    if np.any(np.asarray(r) < 0):
        raise DomainError("curvature needs r >= 0")
    rp2 = (r * p) ** 2
    den = (1.0 + rp2) ** 1.5
    return p * (2.0 + rp2) / den + r * q / den


def curvature_log(x, ux, uxx):
    """Curvature in the log chart, from u_x and u_xx."""
    _check_finite(x, ux, uxx)
    w = 1.0 + ux * ux
    return np.exp(-x) * (ux / np.sqrt(w) + uxx / w**1.5)


def _rhs_radial(r, p, q):
    s = 1.0 + (r * p) ** 2
    return (np.sqrt(s) + p * (2.0 + (r * p) ** 2) / s + r * q / s) / r


def rhs_radial(r, p, q):
    """U_t for the radial chart: (1/r)[sqrt(1+r²p²) + p(2+r²p²)/(1+r²p²) + rq/(1+r²p²)].

    Equals (1 + curvature) * sqrt(1 + r²p²) / r.  Undefined at r = 0; the
    origin is handled by :func:`origin_compatibility`.
    """
    _check_finite(r, p, q)
    if np.any(np.asarray(r) <= 0):
        raise DomainError("rhs_radial needs r > 0; use origin_compatibility at r = 0")
    return _rhs_radial(r, p, q)


def _rhs_radial_partials(r, p, q):
    s = 1.0 + (r * p) ** 2
    rp2 = (r * p) ** 2
    dp = r * p / np.sqrt(s) + (2.0 + rp2 + rp2 * rp2) / (r * s * s) - 2.0 * r * r * p * q / (s * s)
    dq = 1.0 / s
    return dp, dq


def rhs_radial_partials(r, p, q):
    """Closed-form partial derivatives (dF/dp, dF/dq) of :func:`rhs_radial`."""
    _check_finite(r, p, q)
    if np.any(np.asarray(r) <= 0):
        raise DomainError("rhs_radial_partials needs r > 0")
    return _rhs_radial_partials(r, p, q)


def rhs_log(x, ux, uxx):
    """u_t = e^{-x} sqrt(1+u_x²) + e^{-2x} u_x + e^{-2x} u_xx / (1+u_x²)."""
    _check_finite(x, ux, uxx)
    e1 = np.exp(-x)
    e2 = e1 * e1
    return e1 * np.sqrt(1.0 + ux * ux) + e2 * ux + e2 * uxx / (1.0 + ux * ux)


def to_log_chart(r, p, q):
    """Map (r, U_r, U_rr) to (x, u_x, u_xx) for u(x) = U(e^x)."""
    return np.log(r), r * p, r * p + r * r * q


def origin_compatibility(p0, q0):
    """Regularity conditions at r = 0.

    Returns ``(1 + 2 p0, 3 q0)``: the first entry vanishes for a solution that
    is smooth through the origin, the second is the induced U_t(t, 0).
    """
    _check_finite(p0, q0)
    return 1.0 + 2.0 * p0, 3.0 * q0


# ---------------------------------------------------------------------------
# Profile ODE v_x = f(v, x) and its nullcline
# ---------------------------------------------------------------------------


def _zeta(w, x, lam):
    return lam - np.exp(-x) * np.sqrt(1.0 + w * w) - np.exp(-2.0 * x) * w


def ode_f(w, x, lam):
    """f(w, x) = e^{2x} (1 + w²) (lam - e^{-x} sqrt(1+w²) - e^{-2x} w)."""
    _check_finite(w, x, lam)
    return np.exp(2.0 * x) * (1.0 + w * w) * _zeta(w, x, lam)


def ode_f_dw(w, x, lam):
    """Closed-form derivative of :func:`ode_f` with respect to w."""
    _check_finite(w, x, lam)
    e2x = np.exp(2.0 * x)
    dzeta = -w * np.exp(-x) / np.sqrt(1.0 + w * w) - np.exp(-2.0 * x)
    return 2.0 * w * e2x * _zeta(w, x, lam) + e2x * (1.0 + w * w) * dzeta


def nullcline_discriminant(x, lam):
    return lam * lam + (1.0 - np.exp(-2.0 * x)) * (np.exp(2.0 * x) * lam * lam - 1.0)


def nullcline_v0(x, lam):
    """The non-positive root v0(x) of f(., x) = 0.

    Valid for x > 0 where the discriminant of the quadratic
    (1 - e^{-2x}) w² + 2 lam w + 1 - lam² e^{2x} is non-negative.
    """
    _check_finite(x, lam)
    if lam <= 0:
        raise DomainError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    disc = nullcline_discriminant(x, lam)
    if np.any(x <= 0) or np.any(disc < 0):
        raise DomainError("nullcline evaluated below its validity threshold")
    a = -np.expm1(-2.0 * x)
    out = (-lam - np.sqrt(disc)) / a
    return out if out.ndim else float(out)


def nullcline_v0_dx(x, lam):
    """d v0 / dx, from differentiating the defining quadratic."""
    v0 = nullcline_v0(x, lam)
    disc = nullcline_discriminant(np.asarray(x, dtype=float), lam)
    return (lam * lam * np.exp(2.0 * x) - np.exp(-2.0 * x) * v0 * v0) / (-np.sqrt(disc))


def ode_f_offset(d, x, lam, v0=None):
    """f(v0(x) - d, x) evaluated without cancellation against v0.

    Far from the origin v0 ~ -lam e^x while the profile sits only O(e^{-2x})
    below it; forming f(v0 - d) directly loses every significant digit of d.
    Here zeta(v0) = 0 is used exactly so the result is proportional to d.
    """
    if v0 is None:
        v0 = nullcline_v0(x, lam)
    w = v0 - d
    s0 = np.sqrt(1.0 + v0 * v0)
    s1 = np.sqrt(1.0 + w * w)
    zeta = d * (np.exp(-x) * (2.0 * v0 - d) / (s0 + s1) + np.exp(-2.0 * x))
    return np.exp(2.0 * x) * (1.0 + w * w) * zeta


def nullcline_threshold(lam, dx=1e-3, x_hi=60.0):
    """Smallest grid x0 > 0 such that, for every grid x >= x0, the nullcline
    is real and v0(x) <= -1.

    Near x = 0 the root is real again (v0 -> -inf as x -> 0+), but that
    sliver is separated from the far field by an interval with no real root,
    so the threshold is the start of the last valid run of grid points.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    x = np.arange(dx, x_hi, dx)
    disc = nullcline_discriminant(x, lam)
    ok = disc >= 0
    v0 = np.full_like(x, np.inf)
    v0[ok] = (-lam - np.sqrt(disc[ok])) / (-np.expm1(-2.0 * x[ok]))
    good = ok & (v0 <= -1.0)
    if not good[-1]:
        raise DomainError("no nullcline threshold below x_hi")
    bad = np.flatnonzero(~good)
    return float(x[bad[-1] + 1]) if bad.size else float(x[0])


# ---------------------------------------------------------------------------
# Barriers
# ---------------------------------------------------------------------------


def circle_barrier(r):
    """The unit circle through the origin, gamma = -arcsin(r/2), 0 <= r < 2.

    Returns ``(gamma, gamma_r, gamma_rr)``; this curve has 1 + kappa = 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= 2):
        raise DomainError("circle barrier defined for 0 <= r < 2")
    g = 4.0 - r * r
    return -np.arcsin(0.5 * r), -1.0 / np.sqrt(g), -r / g**1.5


def _bump(t):
    """exp(-1/t) for t > 0 with its first two derivatives; zero for t <= 1e-3."""
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 1e-3, t, 1.0)
    g = np.where(t > 1e-3, np.exp(-1.0 / safe), 0.0)
    g1 = g / safe**2
    g2 = g * (1.0 - 2.0 * safe) / safe**4
    return g, g1, g2


def cutoff(r):
    """Smooth cut-off: 1 on [0, 1/2], 0 on [1, inf); returns value, d/dr, d²/dr²."""
    r = np.asarray(r, dtype=float)
    s = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    a, a1, a2 = _bump(1.0 - s)
    b, b1, b2 = _bump(s)
    # d/ds of a(1-s) flips the sign of the first derivative
    a1 = -a1
    tot = a + b
    z = a / tot
    zs = (a1 * b - a * b1) / tot**2
    zss = ((a2 * b - a * b2) * tot - 2.0 * (a1 * b - a * b1) * (a1 + b1)) / tot**3
    inside = (r > 0.5) & (r < 1.0)
    return z, np.where(inside, 2.0 * zs, 0.0), np.where(inside, 4.0 * zss, 0.0)


def cutoff_barrier(r):
    """Psi = cutoff * gamma with derivatives, for 0 < r; zero beyond r = 1."""
    r = np.asarray(r, dtype=float)
    rc = np.minimum(r, 1.0)
    g, g1, g2 = circle_barrier(rc)
    z, z1, z2 = cutoff(r)
    psi = z * g
    psi_r = z1 * g + z * g1
    psi_rr = z2 * g + 2.0 * z1 * g1 + z * g2
    beyond = r >= 1.0
    return (
        np.where(beyond, 0.0, psi),
        np.where(beyond, 0.0, psi_r),
        np.where(beyond, 0.0, psi_rr),
    )


def circle_lambda_hat(n=20001):
    """Upper velocity bound: max of rhs_radial along the cut-off circle on [1/2, 1].

    Returns ``(lambda_hat, r_argmax)``.
    """
    r = np.linspace(0.5, 1.0, n)
    _, pr, prr = cutoff_barrier(r)
    vals = rhs_radial(r, pr, prr)
    i = int(np.argmax(vals))
    return float(vals[i]), float(r[i])


def h_mu(x, mu):
    """rhs_log evaluated on the subsolution -mu e^x, in closed form."""
    _check_finite(x, mu)
    e = np.exp(-x)
    return np.sqrt(e * e + mu * mu) - mu * e * (1.0 + 1.0 / (1.0 + mu * mu / (e * e)))
