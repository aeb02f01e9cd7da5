"""Tikhonov regularization minimized by a projected Gauss-Newton iteration.

Each outer iteration linearizes the forward map at the current iterate,
solves the regularized normal equations with a preconditioned conjugate
gradient method, applies the admissibility projection, and stops as soon
as the data misfit drops below a fixed multiple of the noise level.  The
regularization weight decays geometrically across iterations.

The value at the zero knot is a fixed coordinate of the parametrization
(the law vanishes at zero flux), so the linear step is solved on the
remaining coordinates; the projection therefore only ever acts through
the slope clipping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .discretization import (BoundarySchedule, MeasurementSeries, TimeGrid,
                             observe_pressure_drop, solve_forward)
from .errors import ConfigurationError, NumericalBreakdownError
from .sensitivity import assemble_jacobian, linearize
from .splines import (GramOperator, ParameterBounds, SplineParameter,
                      project_admissible, spline_fit)


@dataclass(frozen=True)
class TikhonovConfig:
    """Schedule and tolerances for the Gauss-Newton minimization."""

    a_star: SplineParameter
    bounds: ParameterBounds = ParameterBounds()
    alpha0: float = 1.0
    alpha_decay: float = 0.5
    discrepancy_factor: float = 1.5
    max_iterations: int = 40
    pcg_tol: float = 1e-8
    pcg_max_iterations: int = 200

    def __post_init__(self):
        if not (0.0 < self.alpha_decay < 1.0):
            raise ConfigurationError("alpha_decay must lie in (0, 1)")
        if not self.discrepancy_factor > 1.0:
            raise ConfigurationError("discrepancy_factor must exceed 1")


@dataclass(frozen=True)
class NoisyData:
    """Measurement series with a perturbation of exactly the stated norm."""

    h_delta: MeasurementSeries
    delta: float
    seed: int


def add_noise(h: MeasurementSeries, delta: float, seed: int) -> NoisyData:
    """Gaussian perturbation rescaled so its discrete L2(0,T) norm equals delta."""
    if delta < 0:
        raise ConfigurationError("noise level must be nonnegative")
    if delta == 0.0:
        return NoisyData(h, 0.0, seed)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(len(h.values))
    norm = np.sqrt(h.weights @ (xi * xi))
    return NoisyData(h.with_values(h.values + (delta / norm) * xi), delta, seed)


def tikhonov_value(grid: TimeGrid, schedule: BoundarySchedule, gram: GramOperator,
                   a: SplineParameter, data: NoisyData, alpha: float,
                   a_star: SplineParameter) -> float:
    """Squared data misfit plus alpha times the squared metric distance to the prior."""
    series = observe_pressure_drop(solve_forward(grid, a, schedule))
    residual = series.values - data.h_delta.values
    misfit_sq = float(series.weights @ (residual * residual))
    diff = a.values - a_star.values
    return misfit_sq + alpha * float(diff @ gram.matrix @ diff)


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    converged: bool
    relative_residual: float


def pcg_solve(apply_op, rhs: np.ndarray, apply_prec=None, tol: float = 1e-8,
              max_iters: int = 200) -> PcgResult:
    """Preconditioned conjugate gradients for an SPD operator given as a callable."""
    if apply_prec is None:
        apply_prec = lambda v: v
    rhs = np.asarray(rhs, dtype=float)
    norm_rhs = np.linalg.norm(rhs)
    x = np.zeros_like(rhs)
    if norm_rhs == 0.0:
        return PcgResult(x, 0, True, 0.0)
    r = rhs.copy()
    z = apply_prec(r)
    p = z.copy()
    gamma = float(r @ z)
    for it in range(1, max_iters + 1):
        ap = apply_op(p)
        denom = float(p @ ap)
        if not np.isfinite(denom) or denom <= 0.0:
            raise NumericalBreakdownError(
                f"conjugate gradient breakdown at iteration {it}", it)
        alpha = gamma / denom
        x += alpha * p
        r -= alpha * ap
        relres = np.linalg.norm(r) / norm_rhs
        if not np.isfinite(relres):
            raise NumericalBreakdownError(
                f"non-finite residual at iteration {it}", it)
        if relres <= tol:
            return PcgResult(x, it, True, float(relres))
        z = apply_prec(r)
        gamma_new = float(r @ z)
        p = z + (gamma_new / gamma) * p
        gamma = gamma_new
    return PcgResult(x, max_iters, False, float(relres))


@dataclass
class IterationRecord:
    index: int
    alpha: float
    misfit: float
    pcg_iterations: int
    step_norm: float
    projection_changed: bool


@dataclass
class ReconstructionResult:
    a_rec: SplineParameter
    alpha_final: float
    iterations: int
    final_misfit: float
    converged: bool
    history: list[IterationRecord] = field(default_factory=list)
    error_l2: float | None = None


def irgn_solve(grid: TimeGrid, schedule: BoundarySchedule, gram: GramOperator,
               data: NoisyData, config: TikhonovConfig,
               initial: SplineParameter | None = None) -> ReconstructionResult:
    """Regularized Gauss-Newton iteration with discrepancy stopping.

    Stops at the first iterate whose misfit is at most
    discrepancy_factor * delta (checked before stepping); the
    regularization weight at the stopping index is reported.
    """
    a_star = config.a_star
    s_star = a_star.values
    a = project_admissible(initial if initial is not None else a_star, config.bounds)
    knots = a.knots
    weights = data.h_delta.weights

    g_full = gram.matrix
    g_free = g_full[1:, 1:]
    cho_free = cho_factor(g_free)

    history: list[IterationRecord] = []
    converged = False
    misfit = np.inf
    alpha = config.alpha0
    iterations = 0
    threshold = config.discrepancy_factor * data.delta

    for n in range(config.max_iterations + 1):
        traj = solve_forward(grid, a, schedule)
        series = observe_pressure_drop(traj)
        residual = data.h_delta.values - series.values
        misfit = float(np.sqrt(weights @ (residual * residual)))
        alpha = config.alpha0 * config.alpha_decay ** n
        iterations = n
        if misfit <= threshold:
            converged = True
            break
        if n == config.max_iterations:
            break

        handle = linearize(grid, a, traj)
        jac = assemble_jacobian(handle)
        jac_free = jac[:, 1:]
        rhs = jac_free.T @ (weights * residual) + alpha * (g_free @ (s_star[1:] - a.values[1:]))

        def normal_op(x, _jf=jac_free, _alpha=alpha):
            return _jf.T @ (weights * (_jf @ x)) + _alpha * (g_free @ x)

        sol = pcg_solve(normal_op, rhs, apply_prec=lambda v: cho_solve(cho_free, v),
                        tol=config.pcg_tol, max_iters=config.pcg_max_iterations)
        step = np.zeros(len(knots))
        step[1:] = sol.x
        proposed = spline_fit(knots, a.values + step)
        projected = project_admissible(proposed, config.bounds)
        changed = projected is not proposed
        a = projected
        history.append(IterationRecord(
            index=n, alpha=alpha, misfit=misfit, pcg_iterations=sol.iterations,
            step_norm=float(np.linalg.norm(step)), projection_changed=changed))

    return ReconstructionResult(a_rec=a, alpha_final=alpha, iterations=iterations,
                                final_misfit=misfit, converged=converged,
                                history=history)
