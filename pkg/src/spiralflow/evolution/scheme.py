"""Method-of-lines discretisation of U_t = rhs_radial(r, U_r, U_rr) on a radial grid."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, UsageError
from ..geometry import Grid, Chart, _rhs_radial, _rhs_radial_partials


class BCKind(enum.Enum):
    ORIGIN_COMPAT = "origin-compat"
    NEUMANN_ZERO = "neumann-zero"
    FAR_FIELD_SLOPE = "far-field-profile-slope"


@dataclass(frozen=True)
class Boundary:
    """Boundary descriptor.  ``slope`` is the imposed U_r for slope conditions."""

    kind: BCKind
    slope: float = 0.0

    def __post_init__(self):
        if self.kind is BCKind.NEUMANN_ZERO and self.slope != 0.0:
            raise DomainError("Neumann-zero boundary carries slope 0")
        if self.kind is BCKind.ORIGIN_COMPAT and self.slope != -0.5:
            object.__setattr__(self, "slope", -0.5)

    @classmethod
    def origin(cls):
        return cls(BCKind.ORIGIN_COMPAT, -0.5)

    @classmethod
    def neumann(cls):
        return cls(BCKind.NEUMANN_ZERO, 0.0)

    @classmethod
    def far_field(cls, slope):
        return cls(BCKind.FAR_FIELD_SLOPE, float(slope))

    def to_dict(self):
        return {"kind": self.kind.value, "slope": self.slope}


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    grid: Grid
    U: np.ndarray
    left: Boundary
    right: Boundary

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if self.grid.chart is not Chart.RADIAL:
            raise DomainError("evolution runs on a radial grid")
        if U.shape != self.grid.nodes.shape:
            raise DomainError("U must have one value per grid node")
        if not np.all(np.isfinite(U)):
            raise DomainError("U must be finite")
        if self.left.kind is BCKind.ORIGIN_COMPAT and not self.grid.includes_origin:
            raise DomainError("origin condition needs a grid through r = 0")
        if self.grid.includes_origin and self.left.kind is not BCKind.ORIGIN_COMPAT:
            raise DomainError("a grid through r = 0 needs the origin condition")
        if self.right.kind is BCKind.ORIGIN_COMPAT:
            raise DomainError("origin condition only applies on the left")

    def with_values(self, t, U) -> "EvolutionState":
        return EvolutionState(t, self.grid, U, self.left, self.right)

    def bc_dict(self):
        return {"left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(eq=False)
class RadialOperator:
    """Discrete right-hand side F_h(U) and its tridiagonal Jacobian.

    Interior nodes use centred second-order stencils on the nonuniform mesh.
    The origin row is 3 U_rr(0) with U_rr(0) from the ghost relation
    U_r(0) = -1/2; slope boundaries eliminate a ghost node the same way.

    ``variant="downwind"`` replaces U_r in the transport part of the equation
    by the one-sided difference on the downwind side.  It is not monotone and
    exists only as a negative control for comparison tests.
    """

    grid: Grid
    left: Boundary
    right: Boundary
    variant: str = "centered"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.variant not in ("centered", "downwind"):
            raise UsageError(f"unknown scheme variant {self.variant!r}")
        r = self.grid.nodes
        h = np.diff(r)
        hm, hp = h[:-1], h[1:]
        d = hm * hp * (hm + hp)
        self.r = r
        self.h = h
        self.ri = r[1:-1]
        self.hm, self.hp = hm, hp
        self.pc = (-hp * hp / d, (hp * hp - hm * hm) / d, hm * hm / d)
        self.qc = (2.0 * hp / d, -2.0 * (hm + hp) / d, 2.0 * hm / d)

    @classmethod
    def for_state(cls, state: EvolutionState, variant="centered"):
        return cls(state.grid, state.left, state.right, variant)

    # -- stencils ---------------------------------------------------------

    def derivatives(self, U):
        """Nodal (U_r, U_rr), with boundary rows from the boundary conditions."""
        U = np.asarray(U, dtype=float)
        p = np.empty_like(U)
        q = np.empty_like(U)
        Um, Ui, Up = U[:-2], U[1:-1], U[2:]
        p[1:-1] = self.pc[0] * Um + self.pc[1] * Ui + self.pc[2] * Up
        q[1:-1] = self.qc[0] * Um + self.qc[1] * Ui + self.qc[2] * Up
        h0, hn = self.h[0], self.h[-1]
        p[0] = self.left.slope
        q[0] = 2.0 * (U[1] - U[0] - h0 * self.left.slope) / (h0 * h0)
        p[-1] = self.right.slope
        q[-1] = 2.0 * (U[-2] - U[-1] + hn * self.right.slope) / (hn * hn)
        return p, q

    def __call__(self, U):
        U = np.asarray(U, dtype=float)
        p, q = self.derivatives(U)
        F = np.empty_like(U)
        ri = self.ri
        if self.variant == "centered":
            F[1:-1] = _rhs_radial(ri, p[1:-1], q[1:-1])
        else:
            pi = p[1:-1]
            pb = (U[1:-1] - U[:-2]) / self.hm
            s = 1.0 + (ri * pi) ** 2
            F[1:-1] = (np.sqrt(s) + pb * (2.0 + (ri * pi) ** 2) / s + ri * q[1:-1] / s) / ri
        if self.left.kind is BCKind.ORIGIN_COMPAT:
            F[0] = 3.0 * q[0]
        else:
            F[0] = _rhs_radial(self.r[0], p[0], q[0])
        F[-1] = _rhs_radial(self.r[-1], p[-1], q[-1])
        return F

    def jacobian_banded(self, U):
        """dF_h/dU in LAPACK (1, 1) banded storage (centred variant)."""
        U = np.asarray(U, dtype=float)
        n = U.size
        p, q = self.derivatives(U)
        gp, gq = _rhs_radial_partials(self.ri, p[1:-1], q[1:-1])
        ab = np.zeros((3, n))
        ab[2, :-2] = gp * self.pc[0] + gq * self.qc[0]
        ab[1, 1:-1] = gp * self.pc[1] + gq * self.qc[1]
        ab[0, 2:] = gp * self.pc[2] + gq * self.qc[2]
        h0, hn = self.h[0], self.h[-1]
        if self.left.kind is BCKind.ORIGIN_COMPAT:
            g0 = 3.0
        else:
            g0 = _rhs_radial_partials(self.r[0], p[0], q[0])[1]
        ab[1, 0] = -2.0 * g0 / (h0 * h0)
        ab[0, 1] = 2.0 * g0 / (h0 * h0)
        gn = _rhs_radial_partials(self.r[-1], p[-1], q[-1])[1]
        ab[1, -1] = -2.0 * gn / (hn * hn)
        ab[2, -2] = 2.0 * gn / (hn * hn)
        return ab

    def min_offdiagonal(self, U):
        """Smallest neighbour coefficient of the linearised scheme.

        Non-negative means the explicit scheme is monotone at this state
        (for time steps under :meth:`stable_dt`).
        """
        ab = self.jacobian_banded(U)
        return float(min(ab[0, 1:].min(), ab[2, :-1].min()))

    def stable_dt(self, U, safety=0.4):
        """Explicit time-step bound.

        The minimum of the diffusive limit dr² (1 + r²p²), the transport limit
        dr r / (2 + r²p²), the origin-row limit dr0² / 6 and the
        advection-diffusion limit 2 D / G_p² (D = 1/(1+r²p²)), times ``safety``.
        """
        p, q = self.derivatives(U)
        ri, pi = self.ri, p[1:-1]
        hl = np.minimum(self.hm, self.hp)
        rp2 = (ri * pi) ** 2
        lim = [np.min(hl * hl * (1.0 + rp2)), np.min(hl * ri / (2.0 + rp2))]
        gp, gq = _rhs_radial_partials(ri, pi, q[1:-1])
        gp2 = gp * gp
        with np.errstate(divide="ignore"):
            lim.append(np.min(np.where(gp2 > 0, 2.0 * gq / gp2, np.inf)))
        if self.left.kind is BCKind.ORIGIN_COMPAT:
            lim.append(self.h[0] ** 2 / 6.0 / safety)
        else:
            lim.append(self.h[0] ** 2 * (1.0 + (self.r[0] * p[0]) ** 2) / 2.0)
        lim.append(self.h[-1] ** 2 * (1.0 + (self.r[-1] * p[-1]) ** 2) / 2.0)
        return float(safety * min(lim))
