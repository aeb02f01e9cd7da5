"""Cubic-spline parametrization of friction-law candidates.

A candidate friction law is stored as its values on a uniform knot grid
[0, u_hi] and evaluated as the not-a-knot cubic interpolant of those
values.  Outside the knot interval the law is extended by odd reflection
below zero and by linear continuation with the end slope above u_hi, so
evaluation is defined on all of R and every evaluation path is linear in
the knot values.  That linearity is what the linearization and adjoint
machinery in :mod:`frictionid.sensitivity` relies on.

The module also provides the discrete H2-type inner product on value
vectors (trapezoid L2 weights plus first/second divided differences),
slope-constraint projection, and the closed-form reference law used in
the benchmark experiments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, ContractViolation

MIN_INTERVALS = 4

# relative slack when deciding whether a slope constraint is violated;
# keeps projection idempotent under cumsum/diff round-trips
_SLOPE_TOL = 1e-12


def uniform_knots(u_hi: float, m: int, u_lo: float = 0.0) -> np.ndarray:
    """Uniform knot grid with m intervals on [u_lo, u_hi].

    The lower end must be 0 so that the odd-reflection extension below
    zero is well defined.
    """
    if m < MIN_INTERVALS:
        raise ConfigurationError(f"need at least {MIN_INTERVALS} knot intervals, got {m}")
    if u_lo != 0.0:
        raise ConfigurationError("knot grid must start at 0 (odd reflection anchor)")
    if not u_hi > u_lo:
        raise ConfigurationError("upper knot must exceed lower knot")
    return np.linspace(u_lo, u_hi, m + 1)


def _ascending_coefficients(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Per-interval polynomial coefficients (ascending powers of the local offset)."""
    cs = CubicSpline(knots, values, bc_type="not-a-knot")
    return cs.c[::-1].T.copy()  # (m, 4)


@dataclass(frozen=True, eq=False)
class SplineParameter:
    """A friction-law candidate: not-a-knot cubic through values at uniform knots."""

    knots: np.ndarray
    values: np.ndarray
    coeffs: np.ndarray = field(init=False, repr=False)
    end_slope: float = field(init=False, repr=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or values.shape != knots.shape:
            raise ConfigurationError("knots and values must be 1D arrays of equal length")
        if len(knots) < MIN_INTERVALS + 1:
            raise ConfigurationError(
                f"need at least {MIN_INTERVALS + 1} knots, got {len(knots)}"
            )
        du = knots[1] - knots[0]
        if du <= 0 or not np.allclose(np.diff(knots), du, rtol=1e-12, atol=0.0):
            raise ConfigurationError("knots must be uniformly spaced and ascending")
        if knots[0] != 0.0:
            raise ConfigurationError("knot grid must start at 0")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        coeffs = _ascending_coefficients(knots, values)
        object.__setattr__(self, "coeffs", coeffs)
        c = coeffs[-1]
        object.__setattr__(self, "end_slope", float(c[1] + 2 * c[2] * du + 3 * c[3] * du * du))

    @property
    def m(self) -> int:
        return len(self.knots) - 1

    @property
    def u_hi(self) -> float:
        return float(self.knots[-1])

    @property
    def spacing(self) -> float:
        return float(self.knots[1] - self.knots[0])

    def with_values(self, values: np.ndarray) -> "SplineParameter":
        return SplineParameter(self.knots, np.asarray(values, dtype=float))

    def __call__(self, xi):
        """Evaluate the extended law at xi (scalar or array)."""
        sign, idx, t, beyond, over = _locate(self.knots, xi)
        c = self.coeffs[idx]
        val = ((c[..., 3] * t + c[..., 2]) * t + c[..., 1]) * t + c[..., 0]
        if beyond.any():
            val = np.where(beyond, self.values[-1] + self.end_slope * over, val)
        out = sign * val
        return out.item() if np.ndim(xi) == 0 else out

    def derivative(self, xi):
        """Derivative of the extended law; even by construction of the odd extension."""
        _, idx, t, beyond, _ = _locate(self.knots, xi)
        c = self.coeffs[idx]
        val = (3 * c[..., 3] * t + 2 * c[..., 2]) * t + c[..., 1]
        if beyond.any():
            val = np.where(beyond, self.end_slope, val)
        return val.item() if np.ndim(xi) == 0 else val


def spline_fit(knots: np.ndarray, values: np.ndarray) -> SplineParameter:
    """Interpolate the given knot values (not-a-knot end conditions)."""
    return SplineParameter(np.asarray(knots, dtype=float), np.asarray(values, dtype=float))


def _locate(knots: np.ndarray, q):
    """Map query points to (sign, interval, local offset, beyond mask, overhang).

    Points below zero are reflected (sign -1); points above the last knot
    are clamped with their overhang recorded for linear continuation.
    """
    x = np.asarray(q, dtype=float)
    sign = np.where(x < 0.0, -1.0, 1.0)
    ax = np.abs(x)
    u_hi = knots[-1]
    beyond = ax > u_hi
    xc = np.where(beyond, u_hi, ax)
    du = knots[1] - knots[0]
    idx = np.minimum((xc / du).astype(np.int64), len(knots) - 2)
    t = xc - idx * du
    over = np.where(beyond, ax - u_hi, 0.0)
    return sign, idx, t, beyond, over


_CARDINAL_CACHE: dict[tuple, np.ndarray] = {}


def cardinal_coefficients(knots: np.ndarray) -> np.ndarray:
    """Polynomial coefficients of all cardinal basis splines, shape (m, 4, m+1).

    Entry [i, d, j] is the coefficient of the d-th local power on interval i
    for the spline interpolating the j-th unit vector.  Cached per knot grid.
    """
    key = (len(knots), float(knots[0]), float(knots[-1]))
    cached = _CARDINAL_CACHE.get(key)
    if cached is not None:
        return cached
    m1 = len(knots)
    cube = np.empty((m1 - 1, 4, m1))
    eye = np.eye(m1)
    for j in range(m1):
        cube[:, :, j] = _ascending_coefficients(knots, eye[j])
    _CARDINAL_CACHE[key] = cube
    return cube


def end_slope_row(knots: np.ndarray) -> np.ndarray:
    """Row vector mapping knot values to the interpolant's slope at the last knot."""
    cube = cardinal_coefficients(knots)
    du = knots[1] - knots[0]
    c = cube[-1]
    return c[1] + 2 * du * c[2] + 3 * du * du * c[3]


def design_rows(knots: np.ndarray, q) -> np.ndarray:
    """Matrix D with D @ values == eval of the extended interpolant at q.

    Rows are exact for the extension rules: reflected points pick up a
    sign, clamped points combine the last-knot value row (a unit vector)
    with the end-slope row times the overhang.
    """
    sign, idx, t, beyond, over = _locate(knots, np.atleast_1d(q))
    cube = cardinal_coefficients(knots)
    powers = np.stack([np.ones_like(t), t, t * t, t ** 3], axis=-1)
    rows = np.einsum("qd,qdj->qj", powers, cube[idx])
    if beyond.any():
        hi_row = np.zeros(len(knots))
        hi_row[-1] = 1.0
        slope_row = end_slope_row(knots)
        rows[beyond] = hi_row[None, :] + over[beyond, None] * slope_row[None, :]
    rows *= sign[:, None]
    return rows


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterBounds:
    """Slope bounds enforced at knot resolution; curvature bounds are reporting-only."""

    slope_lower: float = 0.1
    slope_upper: float = 20.0
    max_curvature: float | None = None
    max_third_derivative: float | None = None

    def __post_init__(self):
        if not (0.0 < self.slope_lower < self.slope_upper):
            raise ConfigurationError("need 0 < slope_lower < slope_upper")


def project_admissible(s: SplineParameter, bounds: ParameterBounds) -> SplineParameter:
    """Clip knot increments into the slope band and pin the value at u=0.

    Increments of the input are clipped independently and re-accumulated
    from the zero knot, so downstream values shift by the accumulated
    correction.  Feasible inputs are returned unchanged (same object).
    """
    du = s.spacing
    lo = bounds.slope_lower * du
    hi = bounds.slope_upper * du
    inc = np.diff(s.values)
    bad = (inc < lo * (1.0 - _SLOPE_TOL)) | (inc > hi * (1.0 + _SLOPE_TOL))
    if not bad.any() and s.values[0] == 0.0:
        return s
    clipped = np.clip(inc, lo, hi)
    values = np.concatenate([[0.0], np.cumsum(clipped)])
    return s.with_values(values)


# ---------------------------------------------------------------------------
# discrete H2 metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GramOperator:
    """Sum of difference-operator approximations to the L2/H1/H2 inner products."""

    knots: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    matrix: np.ndarray
    _cho: tuple = field(repr=False, default=None)


def build_gram(knots: np.ndarray) -> GramOperator:
    """Assemble D0 (trapezoid L2), D1 (first differences), D2 (second differences)."""
    knots = np.asarray(knots, dtype=float)
    m1 = len(knots)
    du = knots[1] - knots[0]

    w0 = np.full(m1, du)
    w0[0] = w0[-1] = du / 2.0
    d0 = np.diag(w0)

    l1 = np.zeros((m1 - 1, m1))
    rows = np.arange(m1 - 1)
    l1[rows, rows] = -1.0 / du
    l1[rows, rows + 1] = 1.0 / du
    d1 = l1.T @ (du * l1)

    l2 = np.zeros((m1 - 2, m1))
    rows = np.arange(m1 - 2)
    l2[rows, rows] = 1.0 / du ** 2
    l2[rows, rows + 1] = -2.0 / du ** 2
    l2[rows, rows + 2] = 1.0 / du ** 2
    w2 = np.full(m1 - 2, du)
    w2[0] = w2[-1] = 1.5 * du  # end knots have no second difference; fold into neighbors
    d2 = l2.T @ (w2[:, None] * l2)

    matrix = d0 + d1 + d2
    return GramOperator(knots, d0, d1, d2, matrix, cho_factor(matrix))


def h2_inner(gram: GramOperator, x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = gram.matrix.shape[0]
    if x.shape != (n,) or y.shape != (n,):
        raise ContractViolation(f"value vectors must have length {n}")
    return float(x @ gram.matrix @ y)


def h2_norm(gram: GramOperator, x: np.ndarray) -> float:
    return np.sqrt(max(h2_inner(gram, x, x), 0.0))


def gram_solve(gram: GramOperator, rhs: np.ndarray) -> np.ndarray:
    return cho_solve(gram._cho, rhs)


def l2_distance(gram: GramOperator, x: np.ndarray, y: np.ndarray) -> float:
    """Distance in the L2 part (D0) of the metric."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.sqrt(d @ gram.d0 @ d))


# ---------------------------------------------------------------------------
# reference laws
# ---------------------------------------------------------------------------

def true_law(u):
    """Reference friction law u*sqrt(1+u^2): linear for small u, quadratic for large."""
    u = np.asarray(u, dtype=float)
    out = u * np.sqrt(1.0 + u * u)
    return out.item() if np.ndim(out) == 0 else out


def true_law_slope(u):
    u = np.asarray(u, dtype=float)
    out = (1.0 + 2.0 * u * u) / np.sqrt(1.0 + u * u)
    return out.item() if np.ndim(out) == 0 else out


def true_parameter(knots: np.ndarray) -> SplineParameter:
    """Spline interpolant of the reference law (test fixture for known-truth runs)."""
    knots = np.asarray(knots, dtype=float)
    return spline_fit(knots, true_law(knots))


def identity_parameter(knots: np.ndarray) -> SplineParameter:
    """The linear law a(u) = u, the default prior guess."""
    knots = np.asarray(knots, dtype=float)
    return spline_fit(knots, knots.copy())


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------

def save_parameter(path, s: SplineParameter, bounds: ParameterBounds | None = None,
                   metadata: dict | None = None) -> None:
    """Write knot,value CSV plus a JSON sidecar with grid and bound information."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["knot", "value"])
        for k, v in zip(s.knots, s.values):
            writer.writerow([f"{k:.17g}", f"{v:.17g}"])
    side = {
        "m": s.m,
        "domain": [float(s.knots[0]), float(s.knots[-1])],
    }
    if bounds is not None:
        side["bounds"] = {
            "slope_lower": bounds.slope_lower,
            "slope_upper": bounds.slope_upper,
            "max_curvature": bounds.max_curvature,
            "max_third_derivative": bounds.max_third_derivative,
        }
    if metadata:
        side.update(metadata)
    path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")


def load_parameter(path) -> SplineParameter:
    path = Path(path)
    knots, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            knots.append(float(row["knot"]))
            values.append(float(row["value"]))
    return spline_fit(np.array(knots), np.array(values))
