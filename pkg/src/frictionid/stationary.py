"""Steady states, the quasi-stationary response map, and proximity metrics.

With equal constant boundary fluxes the system settles into a constant
flux field and an affine pressure profile whose slope is minus the
friction value at that flux; the measured pressure drop then equals the
friction law evaluated at the boundary flux.  Sweeping the flux slowly
therefore samples the law directly, which yields both a closed-form
reconstruction and a yardstick for how far a transient experiment is
from the quasi-stationary regime.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .discretization import (BoundarySchedule, MeasurementSeries, TimeGrid,
                             observe_pressure_drop, solve_forward)
from .splines import SplineParameter, spline_fit


@dataclass(frozen=True)
class SteadyState:
    """Constant-flux solution: affine pressure with slope -a(g_bar)."""

    g_bar: float
    u_bar: float
    delta_p: float
    p_anchor: float

    def pressure_profile(self, x):
        return self.p_anchor - self.delta_p * np.asarray(x, dtype=float)


def solve_steady(a: SplineParameter, g_bar: float, mass: float = 1.0) -> SteadyState:
    """Steady state for boundary flux g_bar, anchored to the given mean pressure."""
    delta_p = float(a(g_bar))
    return SteadyState(g_bar=float(g_bar), u_bar=float(g_bar), delta_p=delta_p,
                       p_anchor=mass + delta_p / 2.0)


def stationary_response(a: SplineParameter, g_series: MeasurementSeries) -> MeasurementSeries:
    """Pressure drop of a sequence of steady experiments: the law composed with the flux."""
    return g_series.with_values(a(g_series.values))


def stationary_reconstruct(knots: np.ndarray, g_series: MeasurementSeries,
                           dp_series: MeasurementSeries) -> SplineParameter:
    """Invert the quasi-stationary relation dp(t) = a(g(t)) on the knot grid.

    Samples are binned by flux value into the cell around each knot and a
    local linear fit per cell is evaluated at the knot, so non-monotone
    schedules pool their passes and dense monotone schedules reduce to
    reading the drop off at the matching flux.  Cells without samples are
    filled by spline interpolation through the recovered neighbors.
    """
    knots = np.asarray(knots, dtype=float)
    du = knots[1] - knots[0]
    g = np.asarray(g_series.values, dtype=float)
    dp = np.asarray(dp_series.values, dtype=float)
    if g.shape != dp.shape:
        raise ValueError("flux and pressure-drop series must share the time grid")

    cell = np.rint((g - knots[0]) / du).astype(np.int64)
    in_range = (cell >= 0) & (cell < len(knots))
    values = np.full(len(knots), np.nan)
    for i in range(len(knots)):
        mask = in_range & (cell == i)
        count = int(mask.sum())
        if count == 0:
            continue
        gi = g[mask] - knots[i]
        di = dp[mask]
        if count == 1 or np.ptp(gi) == 0.0:
            values[i] = di.mean()
        else:
            slope, intercept = np.polyfit(gi, di, 1)
            values[i] = intercept

    missing = np.isnan(values)
    if missing.all():
        raise ValueError("no flux samples fall inside the knot range")
    if missing.any():
        warnings.warn(
            f"{int(missing.sum())} knot cell(s) received no samples; "
            "filling by spline interpolation from neighbors",
            stacklevel=2,
        )
        have = ~missing
        if have.sum() >= 2:
            filler = CubicSpline(knots[have], values[have],
                                 bc_type="not-a-knot" if have.sum() >= 4 else "natural")
            values[missing] = filler(knots[missing])
        else:
            values[missing] = values[have][0]
    return spline_fit(knots, values)


@dataclass(frozen=True)
class ProximityMetrics:
    """Largest state distance (e) and measurement gap (d) to the steady family."""

    state_gap: float
    measurement_gap: float


def proximity_metrics(grid: TimeGrid, a: SplineParameter, schedule: BoundarySchedule,
                      initial_pressure: float = 1.0) -> ProximityMetrics:
    """Distance of the transient solution to the matching steady states.

    At each step the steady pressure is anchored by matching the
    conserved discrete mean of the transient pressure, which makes the
    comparison well posed when both boundary fluxes agree.
    """
    traj = solve_forward(grid, a, schedule, initial_pressure=initial_pressure)
    dp = observe_pressure_drop(traj).values
    mesh = grid.mesh
    nodes = mesh.nodes
    h = mesh.h

    g_vals = np.array([schedule.g0(t) for t in traj.times])
    dp_bar = a(g_vals)
    d_max = float(np.max(np.abs(dp - dp_bar)))

    e_max = 0.0
    chunk = 4096
    for k0 in range(0, len(traj.times), chunk):
        k1 = min(k0 + chunk, len(traj.times))
        p = traj.p_fields[k0:k1]
        means = h * (0.5 * p[:, 0] + p[:, 1:-1].sum(axis=1) + 0.5 * p[:, -1])
        anchors = means + dp_bar[k0:k1] / 2.0
        dev = p - anchors[:, None] + dp_bar[k0:k1, None] * nodes[None, :]
        edge0 = h / 6.0 * (2.0 * dev[:, 0] + dev[:, 1])
        edge1 = h / 6.0 * (dev[:, -2] + 2.0 * dev[:, -1])
        mid = h / 6.0 * (dev[:, :-2] + 4.0 * dev[:, 1:-1] + dev[:, 2:])
        p_sq = dev[:, 0] * edge0 + (dev[:, 1:-1] * mid).sum(axis=1) + dev[:, -1] * edge1
        flux_dev = traj.u_fields[k0:k1] - g_vals[k0:k1, None]
        u_sq = h * (flux_dev * flux_dev).sum(axis=1)
        gaps = np.sqrt(np.maximum(p_sq, 0.0)) + np.sqrt(u_sq)
        e_max = max(e_max, float(gaps.max()))
    return ProximityMetrics(state_gap=e_max, measurement_gap=d_max)
