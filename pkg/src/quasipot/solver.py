"""Ordered solver: initialization, Considered-heap, main loop, K heuristics.

Methods
-------
``olim-r`` / ``olim-mid`` / ``olim-tr`` / ``olim-sim``
    Quadrature-based updates with the hierarchical strategy: when a point
    first becomes Considered it receives cheap one-point updates from every
    front point within the update radius K*h, and triangle updates only
    around the one-point argmin source; afterwards it is improved
    incrementally from each newly accepted front point and that point's
    front neighbors.
``oum``
    Upwind finite-difference baseline with no hierarchy: every time a
    Considered point is touched it is recomputed from all one-point sources
    and all adjacent front pairs within the radius.  Same ordered loop,
    same one-point rule (right-hand); kept as the reference for accuracy
    and CPU-time comparisons.

The main loop pops the smallest tentative value (ties by lowest linear
index), so runs are deterministic and bit-reproducible.  One-point updates
reach at most K*h; triangle updates may reach K*h + sqrt(h1^2 + h2^2)
because the far base vertex is a neighbor of an in-radius point.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels as _k
from .field import VectorField, eval_b, eval_b_many, jacobian
from .mesh import Mesh, PointState


class InitializationError(RuntimeError):
    """Numerical failure while seeding the solve (bad equilibrium, curve
    missing the mesh, ...)."""


METHODS = ("olim-r", "olim-mid", "olim-tr", "olim-sim", "oum")
_METHOD_TABLE = {
    "olim-r": (_k.RULE_R, False),
    "olim-mid": (_k.RULE_MID, False),
    "olim-tr": (_k.RULE_TR, False),
    "olim-sim": (_k.RULE_SIM, False),
    "oum": (_k.RULE_R, True),
}


def rule_of_thumb_K(method: str, n: int) -> int:
    """Heuristic update factor for an n x n mesh.

    Right-hand methods (oum, olim-r): round(log2 n) - 3.
    Higher-order rules (olim-mid/tr/sim): 10 + 4*(round(log2 n) - 7).
    Calibrated for 128 <= n <= 4096; outside that range a warning is
    issued and the exponent is clamped to the nearest calibrated value
    (the formulas extrapolate badly: at n = 64 the unclamped factor is
    too small to reach the grazing update directions).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not 128 <= n <= 4096:
        warnings.warn(f"update-factor heuristic is calibrated for "
                      f"128 <= n <= 4096, got n={n}; clamping", stacklevel=2)
    p = min(max(int(round(math.log2(n))), 7), 12)
    if method in ("oum", "olim-r"):
        k = p - 3
    else:
        k = 10 + 4 * (p - 7)
    return max(1, k)


@dataclass(frozen=True)
class PointInit:
    """Start from an asymptotically stable equilibrium point."""

    x0: tuple[float, float]


@dataclass(frozen=True, eq=False)
class CurveInit:
    """Start from a closed polyline discretizing an attracting limit cycle.

    Vertices are consecutive along the curve; the segment from the last
    vertex back to the first closes it.
    """

    polyline: np.ndarray

    def __post_init__(self):
        poly = np.asarray(self.polyline, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise ValueError("polyline must be an (M, 2) array with M >= 3")
        object.__setattr__(self, "polyline", poly)


InitSpec = Union[PointInit, CurveInit]


def unit_circle_polyline(n: int = 720) -> np.ndarray:
    """Closed n-gon discretization of the unit circle, first vertex (1, 0)."""
    th = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(th), np.sin(th)], axis=1)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Method, update factor, initialization and stopping policy.

    Update lengths are always tracked during the solve (the cost is
    negligible); ``record_update_lengths`` controls whether they are
    written out as artifacts by the CLI.
    """

    method: str
    K: int
    init: InitSpec
    stop: str = "boundary"  # "boundary" | "exhaust"
    record_update_lengths: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; "
                             f"choose from {METHODS}")
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ValueError("update factor K must be a positive integer")
        if self.stop not in ("boundary", "exhaust"):
            raise ValueError("stop policy is 'boundary' or 'exhaust'")
        if not isinstance(self.init, (PointInit, CurveInit)):
            raise ValueError("init must be PointInit or CurveInit")


class ConsideredHeap:
    """Binary min-heap over mesh points keyed by tentative value.

    Carries a point -> slot position map so keys can be decreased in
    O(log n).  Ties are broken by the lower linear index, which makes the
    pop order (and hence the whole solve) deterministic.
    """

    def __init__(self, capacity: int):
        self.keys = np.empty(capacity, dtype=np.float64)
        self.nodes = np.empty(capacity, dtype=np.int64)
        self.pos = np.full(capacity, -1, dtype=np.int64)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def __contains__(self, node: int) -> bool:
        return self.pos[node] >= 0

    def push(self, node: int, key: float) -> None:
        if self.pos[node] >= 0:
            raise ValueError(f"point {node} already enqueued")
        self.size = _k.heap_push(self.keys, self.nodes, self.pos,
                                 self.size, float(key), int(node))

    def pop_min(self) -> tuple[float, int]:
        if self.size == 0:
            raise IndexError("pop from empty heap")
        key, node, self.size = _k.heap_pop(self.keys, self.nodes, self.pos,
                                           self.size)
        return float(key), int(node)

    def decrease(self, node: int, key: float) -> None:
        i = self.pos[node]
        if i < 0:
            raise KeyError(f"point {node} not enqueued")
        if key > self.keys[i]:
            raise ValueError("keys may only decrease")
        _k.heap_decrease(self.keys, self.nodes, self.pos, int(node),
                         float(key))

    def key_of(self, node: int) -> float:
        i = self.pos[node]
        if i < 0:
            raise KeyError(f"point {node} not enqueued")
        return float(self.keys[i])

    def is_valid(self) -> bool:
        """Heap property and position-map consistency."""
        return bool(_k.heap_ok(self.keys, self.nodes, self.pos, self.size))


# ---------------------------------------------------------------------------
# initialization


def _quadratic_seed_coeffs(field: VectorField, x0) -> tuple[float, float, float]:
    """Coefficients (A, B, C) of the local quadratic model
    U(x) ~ dx' [[A, B], [B, C]] dx around a stable equilibrium x0,
    from the linearization of the drift."""
    a = jacobian(field, x0)
    b0 = eval_b(field, x0)
    scale = max(1.0, float(np.sqrt((a * a).sum())))
    if math.hypot(b0[0], b0[1]) > 1e-8 * scale:
        raise InitializationError(
            f"x0={tuple(x0)} is not an equilibrium: |b(x0)| = "
            f"{math.hypot(b0[0], b0[1]):.3e}")
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if not (tr < 0.0 and det > 0.0):
        raise InitializationError(
            f"equilibrium at {tuple(x0)} is not asymptotically stable "
            f"(trace={tr:.3g}, det={det:.3g})")
    rot = a[1, 0] - a[0, 1]
    den = tr * tr + rot * rot
    alpha = tr * tr / den
    beta = rot * tr / den
    qa = -(alpha * a[0, 0] + beta * a[1, 0])
    qb = -(alpha * a[0, 1] + beta * a[1, 1])
    qc = -(alpha * a[1, 1] - beta * a[0, 1])
    return qa, qb, qc


def init_point(mesh: Mesh, field: VectorField, x0) -> list[tuple[int, float]]:
    """Seed values near an asymptotically stable equilibrium.

    The quasi-potential of the linearized drift is the quadratic with
    coefficients from :func:`_quadratic_seed_coeffs`; it is assigned to the
    four corners of the mesh cell containing x0.  When x0 sits on a mesh
    node (within 1e-12*h per coordinate) that node is seeded with 0 and its
    eight neighbors with the quadratic values.

    Returns (linear index, value) pairs in ascending index order.
    """
    x0 = (float(x0[0]), float(x0[1]))
    if not mesh.contains(*x0):
        raise InitializationError(f"equilibrium {x0} lies outside the mesh")
    qa, qb, qc = _quadratic_seed_coeffs(field, x0)

    def quad(idx: int) -> float:
        cx, cy = mesh.coordinate(idx)
        dx, dy = cx - x0[0], cy - x0[1]
        return qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy

    fi = (x0[0] - mesh.x1_min) / mesh.h1
    fj = (x0[1] - mesh.x2_min) / mesh.h2
    ri, rj = round(fi), round(fj)
    tol = 1e-12 * mesh.h
    on_node = (abs(x0[0] - (mesh.x1_min + ri * mesh.h1)) <= tol
               and abs(x0[1] - (mesh.x2_min + rj * mesh.h2)) <= tol
               and 0 <= ri < mesh.n1 and 0 <= rj < mesh.n2)
    if on_node:
        node = mesh.index(int(ri), int(rj))
        seeds = {node: 0.0}
        for nb in mesh.neighbors8(node):
            seeds[nb] = quad(nb)
    else:
        i0 = min(max(int(math.floor(fi)), 0), mesh.n1 - 2)
        j0 = min(max(int(math.floor(fj)), 0), mesh.n2 - 2)
        seeds = {}
        for ii in (i0, i0 + 1):
            for jj in (j0, j0 + 1):
                idx = mesh.index(ii, jj)
                seeds[idx] = quad(idx)
    return sorted(seeds.items())


def curve_seed_values(field: VectorField, polyline: np.ndarray,
                      pts: np.ndarray) -> np.ndarray:
    """Seed values near a closed polyline, per query point.

    For each point x: find the nearest vertex, project x onto the better of
    the two adjacent edge lines (falling back to the vertex itself when x
    lies in its normal cone), estimate |grad U|/2 at x and at the segment
    midpoint by removing the component of b along b(x*), and integrate
    |grad U| along [x*, x] with Simpson's rule (grad U vanishes on the
    cycle, so the x* node contributes nothing).
    """
    poly = np.asarray(polyline, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    m = poly.shape[0]
    # nearest vertex per point, lowest index on ties (chunked argmin)
    near = np.empty(pts.shape[0], dtype=np.int64)
    for lo in range(0, pts.shape[0], 4096):
        hi = min(lo + 4096, pts.shape[0])
        d2 = ((pts[lo:hi, None, :] - poly[None, :, :]) ** 2).sum(axis=2)
        near[lo:hi] = np.argmin(d2, axis=1)

    v1 = poly[near]
    rel = pts - v1
    best_t = np.full(pts.shape[0], -np.inf)
    best_tau = np.zeros_like(pts)
    for step in (+1, -1):
        v2 = poly[(near + step) % m]
        tau = v2 - v1
        norm = np.hypot(tau[:, 0], tau[:, 1])
        ok = norm > 0  # duplicate consecutive vertices carry no direction
        tau[ok] = tau[ok] / norm[ok, None]
        t = np.where(ok, (rel * tau).sum(axis=1), -np.inf)
        take = t > best_t
        best_t[take] = t[take]
        best_tau[take] = tau[take]
    # normal-cone case: both adjacent edges point away, project to the vertex
    t = np.maximum(best_t, 0.0)
    xstar = v1 + t[:, None] * best_tau

    bstar = eval_b_many(field, xstar)
    bstar2 = (bstar * bstar).sum(axis=1)
    if np.any(bstar2 < 1e-24):
        raise InitializationError("drift vanishes at a curve projection")

    def grad_half_norm(y):
        by = eval_b_many(field, y)
        coef = (by * bstar).sum(axis=1) / bstar2
        g = -(by - coef[:, None] * bstar)
        return np.hypot(g[:, 0], g[:, 1])

    dist = np.hypot(pts[:, 0] - xstar[:, 0], pts[:, 1] - xstar[:, 1])
    return dist * (4.0 * grad_half_norm((pts + xstar) / 2.0)
                   + grad_half_norm(pts)) / 3.0


def init_curve(mesh: Mesh, field: VectorField,
               polyline: np.ndarray) -> list[tuple[int, float]]:
    """Seed values near a closed polyline discretizing a limit cycle.

    Mesh points inside the union of the mesh-line-aligned bounding
    rectangles of consecutive vertex pairs are initialized with
    :func:`curve_seed_values`.  Returns (linear index, value) pairs in
    ascending index order.
    """
    poly = np.asarray(polyline, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise InitializationError("polyline must be (M, 2) with M >= 3")
    m = poly.shape[0]
    bpoly = eval_b_many(field, poly)
    if np.any(np.hypot(bpoly[:, 0], bpoly[:, 1]) < 1e-12):
        raise InitializationError("drift vanishes on the initial curve")

    # mesh points covered by the rectangles of consecutive vertex pairs
    mask = np.zeros(mesh.n_points, dtype=bool)
    nxt = np.roll(np.arange(m), -1)
    for k in range(m):
        lo1 = min(poly[k, 0], poly[nxt[k], 0])
        hi1 = max(poly[k, 0], poly[nxt[k], 0])
        lo2 = min(poly[k, 1], poly[nxt[k], 1])
        hi2 = max(poly[k, 1], poly[nxt[k], 1])
        i_lo = int(math.floor((lo1 - mesh.x1_min) / mesh.h1))
        i_hi = int(math.ceil((hi1 - mesh.x1_min) / mesh.h1))
        j_lo = int(math.floor((lo2 - mesh.x2_min) / mesh.h2))
        j_hi = int(math.ceil((hi2 - mesh.x2_min) / mesh.h2))
        i_lo, i_hi = max(i_lo, 0), min(i_hi, mesh.n1 - 1)
        j_lo, j_hi = max(j_lo, 0), min(j_hi, mesh.n2 - 1)
        if i_lo > i_hi or j_lo > j_hi:
            continue
        for ii in range(i_lo, i_hi + 1):
            mask[ii * mesh.n2 + j_lo: ii * mesh.n2 + j_hi + 1] = True
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise InitializationError("initial curve does not touch the mesh")

    vals = curve_seed_values(field, poly, mesh.coordinates()[idx])
    return sorted(zip(idx.tolist(), vals.tolist()))


# ---------------------------------------------------------------------------
# result container


@dataclass(eq=False)
class SolutionGrid:
    """Outcome of one solve, flat arrays in the mesh linearization order.

    ``u`` holds +inf at never-touched points and *tentative* values at
    points still Considered when a boundary stop fired; only points with
    state ACCEPTED_FRONT or ACCEPTED are final (see :meth:`final_mask`).
    Update lengths/kinds/sources describe the last accepted improvement;
    seeds carry kind ``UPD_INIT`` and zero length.
    """

    mesh: Mesh
    config: SolverConfig
    field_name: str
    u: np.ndarray
    state: np.ndarray
    accept_order: np.ndarray
    update_length: np.ndarray
    update_kind: np.ndarray
    update_src0: np.ndarray
    update_src1: np.ndarray
    n_accepted: int
    boundary_index: int | None
    max_accept_decrease: float
    state_violations: int
    front_violations: int
    heap_violations: int
    root_warnings: int
    lower_bound_violations: int
    solve_seconds: float
    init_count: int = 0

    @property
    def u2d(self) -> np.ndarray:
        return self.u.reshape(self.mesh.n1, self.mesh.n2)

    def final_mask(self) -> np.ndarray:
        return self.state >= int(PointState.ACCEPTED_FRONT)

    def computed_mask(self) -> np.ndarray:
        return np.isfinite(self.u)

    def max_update_length(self) -> float:
        ln = self.update_length[self.update_kind >= _k.UPD_ONEPT]
        return float(ln.max()) if ln.size else 0.0

    def update_length_bound(self) -> float:
        """K*h + the cell diagonal: no accepted update may reach farther."""
        msh = self.mesh
        return (self.config.K * msh.h
                + math.hypot(msh.h1, msh.h2) + 1e-12)


def solve(mesh: Mesh, field: VectorField, config: SolverConfig) -> SolutionGrid:
    """Run the ordered solver; see the module docstring for the two modes.

    With the default ``boundary`` stop policy the loop halts as soon as the
    popped minimum lies on the mesh boundary (that point is still accepted);
    ``exhaust`` drains the Considered set so every reachable point ends
    final.  Two runs with identical inputs produce bit-identical grids.
    """
    t_start = time.perf_counter()
    if isinstance(config.init, PointInit):
        seeds = init_point(mesh, field, config.init.x0)
    else:
        seeds = init_curve(mesh, field, config.init.polyline)

    n = mesh.n_points
    u = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.uint8)
    order = np.full(n, -1, dtype=np.int64)
    ulen = np.zeros(n, dtype=np.float64)
    ukind = np.zeros(n, dtype=np.uint8)
    usrc0 = np.full(n, -1, dtype=np.int64)
    usrc1 = np.full(n, -1, dtype=np.int64)
    heap = ConsideredHeap(n)
    for idx, val in seeds:
        u[idx] = val
        state[idx] = int(PointState.CONSIDERED)
        ukind[idx] = _k.UPD_INIT
        heap.push(idx, val)

    bgrid = _k.fill_half_grid(*field.lowered(), mesh.n1, mesh.n2,
                              mesh.x1_min, mesh.x2_min, mesh.h1, mesh.h2)
    rule, use_oum = _METHOD_TABLE[config.method]
    (naccept, boundary_idx, max_dec, stviol, frviol, hpviol,
     rootwarn, lbviol) = _k.solve_loop(
        mesh.n1, mesh.n2, mesh.x1_min, mesh.x2_min, mesh.h1, mesh.h2,
        int(config.K), rule, use_oum, config.stop == "boundary",
        bgrid, u, state, order, ulen, ukind, usrc0, usrc1,
        heap.keys, heap.nodes, heap.pos, heap.size)

    return SolutionGrid(
        mesh=mesh, config=config, field_name=field.name,
        u=u, state=state, accept_order=order,
        update_length=ulen, update_kind=ukind,
        update_src0=usrc0, update_src1=usrc1,
        n_accepted=int(naccept),
        boundary_index=None if boundary_idx < 0 else int(boundary_idx),
        max_accept_decrease=float(max_dec),
        state_violations=int(stviol),
        front_violations=int(frviol),
        heap_violations=int(hpviol),
        root_warnings=int(rootwarn),
        lower_bound_violations=int(lbviol),
        solve_seconds=time.perf_counter() - t_start,
        init_count=len(seeds))
