"""Mixed finite-element discretization of the damped wave system.

Pressure is continuous piecewise linear (n+1 nodal values), the flux is
piecewise constant (n element values) on a uniform mesh of the unit
interval.  A time step treats the differential terms implicitly and the
nonlinear damping term explicitly; eliminating the flux through the
diagonal P0 mass matrix leaves one tridiagonal SPD solve per step.

Boundary fluxes enter weakly through the endpoint values of the pressure
test functions, so nothing is imposed strongly on the flux field.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from ._kernels import forward_march
from .errors import ConfigurationError, DomainExcursionError
from .splines import SplineParameter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh of (0,1) with at least two elements."""

    n_elements: int

    def __post_init__(self):
        if self.n_elements < 2:
            raise ConfigurationError(f"need at least 2 elements, got {self.n_elements}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_elements + 1)


@dataclass(frozen=True)
class BoundarySchedule:
    """Prescribed boundary fluxes at both pipe ends over a time horizon."""

    g0: Callable[[float], float]
    g1: Callable[[float], float]
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")


def mass_matvec_p1(h: float, p: np.ndarray) -> np.ndarray:
    """Tridiagonal P1 mass matrix applied to nodal values."""
    out = np.empty_like(p)
    out[0] = h / 6.0 * (2.0 * p[0] + p[1])
    out[-1] = h / 6.0 * (p[-2] + 2.0 * p[-1])
    out[1:-1] = h / 6.0 * (p[:-2] + 4.0 * p[1:-1] + p[2:])
    return out


def div_matvec(p: np.ndarray) -> np.ndarray:
    """Per-element integral of the derivative of a P1 field: adjacent differences."""
    return np.diff(p)


def div_transpose_matvec(d: np.ndarray) -> np.ndarray:
    """Transpose of :func:`div_matvec` (element values to nodal values)."""
    out = np.empty(len(d) + 1)
    out[0] = -d[0]
    out[-1] = d[-1]
    out[1:-1] = d[:-1] - d[1:]
    return out


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Assembled matrices and the Schur factorization for one (mesh, tau) pair.

    The Schur matrix Mp + tau^2 * B^T Mu^-1 B is tridiagonal and SPD; its
    banded Cholesky factor is computed once and reused for every step.
    Instances are immutable and safe to share across concurrent solves.
    """

    mesh: Mesh1D
    tau: float
    schur_factor: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError(f"time step must be positive, got {self.tau}")
        n = self.mesh.n_elements
        h = self.mesh.h
        ratio = self.tau ** 2 / h
        diag = np.full(n + 1, 2.0 * h / 3.0 + 2.0 * ratio)
        diag[0] = diag[-1] = h / 3.0 + ratio
        upper = np.full(n + 1, h / 6.0 - ratio)
        upper[0] = 0.0  # banded storage convention: first superdiagonal entry unused
        ab = np.vstack([upper, diag])
        object.__setattr__(self, "schur_factor", cholesky_banded(ab, lower=False))

    def schur_solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.schur_factor, False), rhs)

    def mu_diagonal(self) -> np.ndarray:
        return np.full(self.mesh.n_elements, self.mesh.h)


def assemble_operators(mesh: Mesh1D, tau: float) -> DiscreteOperators:
    return DiscreteOperators(mesh, tau)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Space-time discretization: uniform mesh plus uniform time steps up to T."""

    mesh: Mesh1D
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        if self.n_steps < 1:
            raise ConfigurationError("need at least one time step")

    @classmethod
    def for_horizon(cls, mesh: Mesh1D, horizon: float, steps_per_element: float = 2.0) -> "TimeGrid":
        """Choose the step count so tau <= h / steps_per_element and Nt*tau == T exactly."""
        target = mesh.h / steps_per_element
        return cls(mesh, horizon, max(1, math.ceil(horizon / target - 1e-12)))

    @property
    def tau(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.tau

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights for the discrete L2(0,T) inner product."""
        w = np.full(self.n_steps + 1, self.tau)
        w[0] = w[-1] = self.tau / 2.0
        return w

    @cached_property
    def operators(self) -> DiscreteOperators:
        return assemble_operators(self.mesh, self.tau)


@dataclass(frozen=True, eq=False)
class MeasurementSeries:
    """Time series on the grid together with its quadrature weights."""

    times: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.weights)):
            raise ConfigurationError("series components must have equal length")

    def norm(self) -> float:
        """Discrete L2(0,T) norm."""
        return float(np.sqrt(self.weights @ (self.values ** 2)))

    def with_values(self, values: np.ndarray) -> "MeasurementSeries":
        return MeasurementSeries(self.times, np.asarray(values, dtype=float), self.weights)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Discrete pressure/flux fields for every time step of one solve."""

    grid: TimeGrid
    times: np.ndarray
    p_fields: np.ndarray  # (Nt+1, n+1)
    u_fields: np.ndarray  # (Nt+1, n)
    flux_range: tuple[float, float]

    def __post_init__(self):
        nt = self.grid.n_steps
        n = self.grid.mesh.n_elements
        if self.p_fields.shape != (nt + 1, n + 1) or self.u_fields.shape != (nt + 1, n):
            raise ConfigurationError("trajectory field shapes inconsistent with grid")
        if abs(self.times[-1] - self.grid.horizon) > 1e-12 * max(1.0, self.grid.horizon):
            raise ConfigurationError("final time must equal the horizon")


def forward_step(ops: DiscreteOperators, p: np.ndarray, u: np.ndarray,
                 g_next: tuple[float, float], a: SplineParameter,
                 tau: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Advance (p, u) by one step; boundary fluxes are taken at the new time level."""
    if tau is None:
        tau = ops.tau
    elif tau != ops.tau:
        raise ConfigurationError("tau differs from the assembled operators; reassemble")
    h = ops.mesh.h
    d = u - tau * a(u)
    rhs = mass_matvec_p1(h, p) + tau * div_transpose_matvec(d)
    rhs[0] += tau * g_next[0]
    rhs[-1] -= tau * g_next[1]
    p_next = ops.schur_solve(rhs)
    u_next = d - (tau / h) * np.diff(p_next)
    return p_next, u_next


def solve_forward(grid: TimeGrid, a: SplineParameter, schedule: BoundarySchedule,
                  initial_pressure: float = 1.0,
                  initial_state: tuple[np.ndarray, np.ndarray] | None = None) -> StateTrajectory:
    """March the full trajectory from rest (constant pressure, zero flux).

    ``initial_state`` overrides the rest state, which is used by the
    energy-dissipation diagnostics.  The whole trajectory is kept in
    memory; storage for the 1D problem is modest.
    """
    if abs(schedule.horizon - grid.horizon) > 1e-12 * max(1.0, grid.horizon):
        raise ConfigurationError("schedule horizon does not match the time grid")
    mesh = grid.mesh
    n = mesh.n_elements
    nt = grid.n_steps
    tau = grid.tau
    ops = grid.operators

    p_fields = np.empty((nt + 1, n + 1))
    u_fields = np.empty((nt + 1, n))
    if initial_state is None:
        p_fields[0] = initial_pressure
        u_fields[0] = 0.0
    else:
        p0, u0 = initial_state
        p_fields[0] = np.asarray(p0, dtype=float)
        u_fields[0] = np.asarray(u0, dtype=float)

    g0_vals = np.array([float(schedule.g0(t)) for t in grid.times])
    g1_vals = np.array([float(schedule.g1(t)) for t in grid.times])
    fac = ops.schur_factor
    bad, umin, umax = forward_march(
        p_fields, u_fields, g0_vals, g1_vals,
        a.coeffs, a.spacing, a.u_hi, float(a.values[-1]), a.end_slope,
        fac[1], fac[0], mesh.h, tau)
    if bad >= 0:
        value = umax if not np.isfinite(umax) else umin
        raise DomainExcursionError(
            f"flux field left the representable range at step {bad}", float(value), int(bad))

    if umin < a.knots[0] or umax > a.u_hi:
        log.debug("flux excursion outside knot interval: [%g, %g]", umin, umax)
    return StateTrajectory(grid, grid.times, p_fields, u_fields, (umin, umax))


def observe_pressure_drop(traj: StateTrajectory) -> MeasurementSeries:
    """Pressure difference between the two pipe ends at every step."""
    values = traj.p_fields[:, 0] - traj.p_fields[:, -1]
    return MeasurementSeries(traj.times, values, traj.grid.weights)


def discrete_energy(p: np.ndarray, u: np.ndarray, ops: DiscreteOperators) -> float:
    """Half the squared mass-weighted norms of the two fields."""
    h = ops.mesh.h
    return float(0.5 * (p @ mass_matvec_p1(h, p) + h * (u @ u)))


def pressure_mean(p: np.ndarray, mesh: Mesh1D) -> float:
    """Mass-weighted mean of the pressure field (total mass of the mesh is 1)."""
    h = mesh.h
    return float(h * (0.5 * p[0] + p[1:-1].sum() + 0.5 * p[-1]))
