"""Quick runtime sanity checks wired to the ``selftest`` subcommand.

These mirror the heavier test-suite properties at coarse resolution:
exactness of the transpose pairing, agreement of the linearization with
finite differences, energy dissipation, and the noise-norm construction.
"""

from __future__ import annotations

import numpy as np

from .discretization import (BoundarySchedule, Mesh1D, TimeGrid, discrete_energy,
                             observe_pressure_drop, solve_forward)
from .experiments import ExperimentConfig, flux_schedule
from .inversion import add_noise
from .sensitivity import apply_jacobian, apply_jacobian_transpose, linearize
from .splines import spline_fit, true_parameter, uniform_knots


def _report(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def run_selftest(cfg: ExperimentConfig, n_elements: int = 60, horizon: float = 2.0) -> bool:
    rng = np.random.default_rng(7)
    knots = uniform_knots(cfg.flux_upper, cfg.m_knots)
    a_true = true_parameter(knots)
    mesh = Mesh1D(n_elements)
    grid = TimeGrid.for_horizon(mesh, horizon)
    schedule = flux_schedule(horizon)
    traj = solve_forward(grid, a_true, schedule)
    handle = linearize(grid, a_true, traj)

    ok = True

    # transpose pairing on random direction/series pairs
    worst = 0.0
    for _ in range(5):
        b_vals = rng.standard_normal(len(knots))
        b_vals[0] = 0.0
        b = spline_fit(knots, b_vals)
        psi = rng.standard_normal(grid.n_steps + 1)
        jb = apply_jacobian(handle, b)
        lhs = float(jb.weights @ (jb.values * psi))
        rhs = float(apply_jacobian_transpose(handle, psi) @ b_vals)
        scale = jb.norm() * np.linalg.norm(psi) + 1e-300
        worst = max(worst, abs(lhs - rhs) / scale)
    ok &= _report("adjoint pairing", worst <= 1e-12, f"max relative gap {worst:.2e}")

    # central finite difference against the linearization
    b_vals = np.exp(-((knots - 1.0) ** 2) / 0.08)
    b_vals[0] = 0.0
    bump = spline_fit(knots, b_vals)
    jb = apply_jacobian(handle, bump).values
    s = 1e-4
    plus = observe_pressure_drop(solve_forward(grid, spline_fit(knots, a_true.values + s * bump.values), schedule)).values
    minus = observe_pressure_drop(solve_forward(grid, spline_fit(knots, a_true.values - s * bump.values), schedule)).values
    fd = (plus - minus) / (2 * s)
    rel = np.linalg.norm(fd - jb) / np.linalg.norm(jb)
    ok &= _report("finite-difference gradient", rel <= 1e-5, f"relative error {rel:.2e}")

    # energy dissipation with homogeneous boundary data
    quiet = BoundarySchedule(g0=lambda t: 0.0, g1=lambda t: 0.0, horizon=horizon)
    nodes = mesh.nodes
    p0 = 1.0 + 0.5 * np.cos(2 * np.pi * nodes)
    traj0 = solve_forward(grid, a_true, quiet, initial_state=(p0, np.zeros(n_elements)))
    ops = grid.operators
    h = mesh.h
    tau = grid.tau
    slack_ok = True
    for k in range(grid.n_steps):
        e0 = discrete_energy(traj0.p_fields[k], traj0.u_fields[k], ops)
        e1 = discrete_energy(traj0.p_fields[k + 1], traj0.u_fields[k + 1], ops)
        au = a_true(traj0.u_fields[k])
        budget = 0.5 * tau * tau * h * float(au @ au)
        if e1 > e0 + budget * (1 + 1e-9) + 1e-15:
            slack_ok = False
            break
    ok &= _report("energy dissipation", slack_ok, "per-step budget respected")

    # exact noise norm
    series = observe_pressure_drop(traj)
    data = add_noise(series, 0.05, seed=123)
    err = abs(np.sqrt(series.weights @ ((data.h_delta.values - series.values) ** 2)) - 0.05) / 0.05
    ok &= _report("noise norm", err <= 1e-14, f"relative deviation {err:.2e}")

    return bool(ok)
