"""Exact linearization of the discrete forward map and its transpose.

The directional derivative of the measurement with respect to the knot
values is obtained by differentiating the time-stepping scheme step by
step: the flux update inherits the term -tau*(a'(u^n) w^n + b(u^n)),
after which the same Schur elimination advances the linearized fields.

The gradient map is the exact algebraic transpose of that recursion with
respect to the time-quadrature pairing on the measurement side and the
plain Euclidean pairing on knot values.  It is realized as a backward
march of adjoint pressure/flux fields from zero terminal data, so matrix
transposition and discrete adjoint state coincide by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import assemble_march, sensitivity_march, transpose_march
from .discretization import MeasurementSeries, StateTrajectory, TimeGrid
from .errors import ContractViolation
from .splines import SplineParameter, cardinal_coefficients, end_slope_row


@dataclass(frozen=True, eq=False)
class JacobianHandle:
    """Linearization point: parameter, base flux trajectory, grid context.

    Valid only for the trajectory produced by the same parameter on the
    same grid; all fields are immutable, so concurrent applications of
    the handle are safe.
    """

    grid: TimeGrid
    a: SplineParameter
    u_fields: np.ndarray = field(repr=False)


def linearize(grid: TimeGrid, a: SplineParameter, trajectory: StateTrajectory) -> JacobianHandle:
    tg = trajectory.grid
    if tg is not grid and (tg.mesh.n_elements != grid.mesh.n_elements
                           or tg.horizon != grid.horizon or tg.n_steps != grid.n_steps):
        raise ContractViolation("trajectory was computed on a different grid")
    return JacobianHandle(grid, a, trajectory.u_fields)


def _check_direction(handle: JacobianHandle, b: SplineParameter) -> None:
    if b.knots.shape != handle.a.knots.shape or not np.array_equal(b.knots, handle.a.knots):
        raise ContractViolation("direction lives on a different knot grid than the handle")


def _factor_rows(grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    fac = grid.operators.schur_factor
    return fac[1], fac[0]


def apply_jacobian(handle: JacobianHandle, b: SplineParameter) -> MeasurementSeries:
    """Derivative of the pressure-drop series in direction b."""
    _check_direction(handle, b)
    grid = handle.grid
    a = handle.a
    fac_d, fac_s = _factor_rows(grid)
    out = np.empty(grid.n_steps + 1)
    sensitivity_march(handle.u_fields, a.coeffs, a.end_slope,
                      b.coeffs, float(b.values[-1]), b.end_slope,
                      a.spacing, a.u_hi, fac_d, fac_s,
                      grid.mesh.h, grid.tau, out)
    return MeasurementSeries(grid.times, out, grid.weights)


def apply_jacobian_transpose(handle: JacobianHandle, psi) -> np.ndarray:
    """Gradient on knot values: transpose of :func:`apply_jacobian` under
    the time-quadrature pairing.

    ``psi`` may be a plain array on the time grid or a MeasurementSeries.
    The returned vector gamma satisfies
    sum_k W_k psi_k (J b)_k == gamma . b_values for every direction b.
    """
    grid = handle.grid
    values = psi.values if isinstance(psi, MeasurementSeries) else np.asarray(psi, dtype=float)
    if values.shape != (grid.n_steps + 1,):
        raise ContractViolation(f"psi must have length {grid.n_steps + 1}")
    a = handle.a
    knots = a.knots
    cube = cardinal_coefficients(knots)
    slope_row = end_slope_row(knots)
    fac_d, fac_s = _factor_rows(grid)
    gamma = np.empty(len(knots))
    transpose_march(handle.u_fields, values, grid.weights,
                    a.coeffs, a.end_slope, cube, slope_row,
                    a.spacing, a.u_hi, fac_d, fac_s,
                    grid.mesh.h, grid.tau, gamma)
    return gamma


def assemble_jacobian(handle: JacobianHandle) -> np.ndarray:
    """Dense Jacobian (Nt+1, m+1): all cardinal directions in one batched sweep.

    Column j equals apply_jacobian on the j-th cardinal basis direction;
    batching shares the Schur solves and the basis evaluation per step.
    """
    grid = handle.grid
    a = handle.a
    knots = a.knots
    cube = cardinal_coefficients(knots)
    slope_row = end_slope_row(knots)
    fac_d, fac_s = _factor_rows(grid)
    jac = np.empty((grid.n_steps + 1, len(knots)))
    assemble_march(handle.u_fields, a.coeffs, a.end_slope, cube, slope_row,
                   a.spacing, a.u_hi, fac_d, fac_s,
                   grid.mesh.h, grid.tau, jac)
    return jac
