"""Post-processing: gradients, minimum-action path tracing, error metrics.

The quasi-potential gradient is reconstructed by second-order finite
differences (central in the interior, one-sided at the boundary) and
NaN-propagated wherever the grid is not computed.  Paths of steepest
descent of the combined drift, i.e. solutions of

    phi' = -(b(phi) + grad U(phi)),

traced backward from a target point, converge to the attractor along the
minimum action path; the classical fourth-order Runge-Kutta scheme with a
step of a quarter mesh cell and bilinear interpolation of the gradient grid
keeps the integrator error below the grid error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .field import VectorField, eval_b, eval_b_many
from .mesh import Mesh
from .solver import PointInit, SolutionGrid


@dataclass(eq=False)
class GradientGrid:
    """Per-point estimate of grad U; NaN where U is not computed."""

    mesh: Mesh
    gx: np.ndarray  # flat, d/dx1
    gy: np.ndarray  # flat, d/dx2


def gradient(grid: SolutionGrid, mesh: Mesh | None = None) -> GradientGrid:
    """Finite-difference gradient of the computed quasi-potential.

    Central differences in the interior, second-order one-sided stencils at
    the mesh boundary; any unset value in a stencil makes the result NaN.
    Exact (to round-off) on grids sampled from quadratic polynomials.
    """
    msh = mesh if mesh is not None else grid.mesh
    u = grid.u2d.copy()
    u[~np.isfinite(u)] = np.nan
    h1, h2 = msh.h1, msh.h2
    gx = np.full_like(u, np.nan)
    gy = np.full_like(u, np.nan)
    gx[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * h1)
    gx[0, :] = (-3.0 * u[0, :] + 4.0 * u[1, :] - u[2, :]) / (2.0 * h1)
    gx[-1, :] = (3.0 * u[-1, :] - 4.0 * u[-2, :] + u[-3, :]) / (2.0 * h1)
    gy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * h2)
    gy[:, 0] = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * h2)
    gy[:, -1] = (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) / (2.0 * h2)
    return GradientGrid(msh, gx.reshape(-1), gy.reshape(-1))


class PathStatus(Enum):
    REACHED_ATTRACTOR = "reached_attractor"
    LEFT_DOMAIN = "left_domain"
    MAX_STEPS = "max_steps"


@dataclass(eq=False)
class Path:
    """Ordered polyline with the reason the tracer stopped."""

    points: np.ndarray  # (n, 2)
    status: PathStatus
    step: float

    def __len__(self) -> int:
        return self.points.shape[0]


class _BilinearGradient:
    """Bilinear interpolation of a gradient grid; None outside the computed
    region (or outside the mesh)."""

    def __init__(self, grad: GradientGrid):
        self.mesh = grad.mesh
        self.gx = grad.gx.reshape(self.mesh.n1, self.mesh.n2)
        self.gy = grad.gy.reshape(self.mesh.n1, self.mesh.n2)

    def __call__(self, x1: float, x2: float):
        msh = self.mesh
        fi = (x1 - msh.x1_min) / msh.h1
        fj = (x2 - msh.x2_min) / msh.h2
        if not (0.0 <= fi <= msh.n1 - 1 and 0.0 <= fj <= msh.n2 - 1):
            return None
        i = min(int(fi), msh.n1 - 2)
        j = min(int(fj), msh.n2 - 2)
        tx = fi - i
        ty = fj - j
        g00x = self.gx[i, j]
        g10x = self.gx[i + 1, j]
        g01x = self.gx[i, j + 1]
        g11x = self.gx[i + 1, j + 1]
        g00y = self.gy[i, j]
        g10y = self.gy[i + 1, j]
        g01y = self.gy[i, j + 1]
        g11y = self.gy[i + 1, j + 1]
        if math.isnan(g00x) or math.isnan(g10x) or math.isnan(g01x) \
                or math.isnan(g11x):
            return None
        wx = ((1 - tx) * (1 - ty) * g00x + tx * (1 - ty) * g10x
              + (1 - tx) * ty * g01x + tx * ty * g11x)
        wy = ((1 - tx) * (1 - ty) * g00y + tx * (1 - ty) * g10y
              + (1 - tx) * ty * g01y + tx * ty * g11y)
        return wx, wy


def _distance_to_polyline(p: np.ndarray, poly: np.ndarray) -> float:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    t = ((p - a) * ab).sum(axis=1) / np.maximum(denom, 1e-300)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1]).min())


def trace_map(grid: SolutionGrid, field: VectorField, x_start,
              step_factor: float = 0.25,
              max_steps: int = 1_000_000,
              grad: GradientGrid | None = None) -> Path:
    """Trace the minimum action path backward from x_start.

    Integrates phi' = -(b + grad U) with classical RK4, step
    ``step_factor * h``, and stops within one mesh step of the attractor
    (the init point, or the init polyline for cycles), on leaving the
    computed region, or at ``max_steps``.  The returned polyline is
    oriented the way the minimum action path runs, attractor first, so
    its geometric action estimates the quasi-potential at ``x_start``.
    """
    msh = grid.mesh
    if grad is None:
        grad = gradient(grid)
    interp = _BilinearGradient(grad)
    x = (float(x_start[0]), float(x_start[1]))
    if interp(*x) is None:
        raise ValueError(f"start point {x} is outside the computed region")

    init = grid.config.init
    if isinstance(init, PointInit):
        target = np.asarray(init.x0, dtype=float)

        def near_attractor(p):
            return math.hypot(p[0] - target[0], p[1] - target[1]) <= msh.h
    else:
        poly = init.polyline

        def near_attractor(p):
            return _distance_to_polyline(np.asarray(p), poly) <= msh.h

    def rhs(p):
        g = interp(p[0], p[1])
        if g is None:
            return None
        b = eval_b(field, p)
        return (-(b[0] + g[0]), -(b[1] + g[1]))

    dt = step_factor * msh.h
    pts = [x]
    status = PathStatus.MAX_STEPS
    if near_attractor(x):
        return Path(np.asarray(pts), PathStatus.REACHED_ATTRACTOR, dt)
    for _ in range(max_steps):
        k1 = rhs(x)
        if k1 is None:
            status = PathStatus.LEFT_DOMAIN
            break
        x2 = (x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1])
        k2 = rhs(x2)
        if k2 is None:
            status = PathStatus.LEFT_DOMAIN
            break
        x3 = (x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1])
        k3 = rhs(x3)
        if k3 is None:
            status = PathStatus.LEFT_DOMAIN
            break
        x4 = (x[0] + dt * k3[0], x[1] + dt * k3[1])
        k4 = rhs(x4)
        if k4 is None:
            status = PathStatus.LEFT_DOMAIN
            break
        x = (x[0] + dt * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0,
             x[1] + dt * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0)
        pts.append(x)
        if near_attractor(x):
            status = PathStatus.REACHED_ATTRACTOR
            break
    return Path(np.asarray(pts[::-1]), status, dt)


def geometric_action(path, field: VectorField) -> float:
    """Composite-trapezoid action of a polyline; parametrization-invariant.

    Accepts a :class:`Path` or an (n, 2) array.  Single-point (or empty)
    paths have zero action.
    """
    pts = path.points if isinstance(path, Path) else np.asarray(path, float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        return 0.0
    b = eval_b_many(field, pts)
    nb = np.hypot(b[:, 0], b[:, 1])
    seg = pts[1:] - pts[:-1]
    ell = np.hypot(seg[:, 0], seg[:, 1])
    dots = (b[:-1] * seg).sum(axis=1) + (b[1:] * seg).sum(axis=1)
    return float(0.5 * ((nb[:-1] + nb[1:]) * ell - dots).sum())


def freidlin_wentzell_action(path, field: VectorField) -> float:
    """Discrete time-parametrized action with the speed matched to ||b||.

    Each segment is assigned the travel time that makes the discrete speed
    equal ||b|| at the segment midpoint; with that parametrization the
    quadratic action collapses onto the geometric one, which this function
    exposes for verification.
    """
    pts = path.points if isinstance(path, Path) else np.asarray(path, float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        return 0.0
    mids = 0.5 * (pts[:-1] + pts[1:])
    b = eval_b_many(field, mids)
    nb = np.hypot(b[:, 0], b[:, 1])
    seg = pts[1:] - pts[:-1]
    ell = np.hypot(seg[:, 0], seg[:, 1])
    keep = (ell > 0) & (nb > 0)
    dt = ell[keep] / nb[keep]
    v = seg[keep] / dt[:, None]
    diff = v - b[keep]
    return float(0.5 * ((diff * diff).sum(axis=1) * dt).sum())


def error_metrics(grid: SolutionGrid, exact) -> dict[str, float]:
    """Max-abs and RMS error of the final points against ``exact(x1, x2)``.

    Non-final points (still Considered after a boundary stop, or never
    reached) are excluded so the stop policy does not pollute comparisons.
    """
    mask = grid.final_mask()
    if not mask.any():
        return {"max_abs": math.nan, "rms": math.nan, "n_points": 0}
    pts = grid.mesh.coordinates()[mask]
    diff = np.abs(grid.u[mask] - np.asarray(exact(pts[:, 0], pts[:, 1]),
                                            dtype=float))
    return {"max_abs": float(diff.max()),
            "rms": float(np.sqrt(np.mean(diff * diff))),
            "n_points": int(mask.sum())}


def fit_power_law(ns, es) -> tuple[float, float]:
    """Least-squares fit of E = C * N^(-q); returns (C, q)."""
    ns = np.asarray(ns, dtype=float)
    es = np.asarray(es, dtype=float)
    if ns.size != es.size or ns.size < 3:
        raise ValueError("need at least 3 (N, E) samples")
    if np.any(ns <= 0) or np.any(es <= 0):
        raise ValueError("power-law fit needs positive inputs")
    slope, intercept = np.polyfit(np.log(ns), np.log(es), 1)
    return float(np.exp(intercept)), float(-slope)
