"""Local update rules: one-point, quadrature triangle, upwind FD triangle.

A candidate proposes a new quasi-potential value at the point ``x`` being
updated.  Triangle updates minimize

    f(s) = s*u0 + (1-s)*u1 + action(x_s -> x),   x_s = s*x0 + (1-s)*x1

over s in [0, 1], with the field linearly interpolated between prefetched
samples along the base (so the stationarity equations are exact for the
interpolated integrand).  Candidates are interior minimizers only; endpoint
minima are covered by one-point updates from x0 / x1 themselves.

The OLIM-R stationarity equation is rational in s; squaring it yields a
quadratic whose roots are filtered against the original equation, since
squaring introduces spurious roots.  The other rules bracket an interior
root of g = f' by requiring g(0) < 0 < g(1) and solve with a hybrid
secant/bisection iteration.  The upwind finite-difference update
(:func:`oum_triangle_update`) is the classical alternative: it solves the
discretized Hamilton-Jacobi relation directly and accepts a root only when
the characteristic b + grad U crosses the open base segment; with the
right-hand rule both routes agree on interior solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as _k
from .field import VectorField, eval_b
from .quadrature import QuadRule, samples_from_field, segment_action

ONE_POINT = "one-point"
TRIANGLE = "triangle"


@dataclass(frozen=True)
class UpdateCandidate:
    """Proposed value at x; +inf means the update declined to propose.

    ``s_star`` is the minimizing barycentric parameter for triangle
    candidates (in the open interval (0, 1)); None for one-point updates.
    ``src0``/``src1`` carry mesh indices when the solver produced the
    candidate, -1 otherwise.
    """

    value: float
    kind: str
    s_star: float | None = None
    src0: int = -1
    src1: int = -1

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def one_point_update(rule: QuadRule, x0, u0: float, x,
                     field: VectorField) -> UpdateCandidate:
    """u0 plus the segment action from x0 to x with field-sampled nodes."""
    q = segment_action(rule, samples_from_field(field, x0, x))
    return UpdateCandidate(u0 + q, ONE_POINT)


@dataclass(frozen=True)
class RootProblem:
    """Scalar root problem for :func:`hybrid_root` on the bracket [a, b]."""

    g: Callable[[float], float]
    a: float = 0.0
    b: float = 1.0
    tol_s: float = _k.ROOT_TOL_S
    tol_g: float = 0.0
    max_iter: int = _k.ROOT_MAX_ITER


@dataclass(frozen=True)
class RootResult:
    s: float
    converged: bool
    iterations: int


def hybrid_root(problem: RootProblem) -> RootResult | None:
    """Hybrid secant/bisection root of g on [a, b]; None when no sign change.

    Secant steps are taken while they stay strictly inside the current
    bracket and make progress; otherwise the step falls back to bisection.
    The bracket is maintained throughout, so the iteration cannot escape.
    On max-iteration exhaustion the bracket midpoint is returned with
    ``converged=False``.
    """
    a, b = problem.a, problem.b
    ga, gb = problem.g(a), problem.g(b)
    if ga == 0.0:
        return RootResult(a, True, 0)
    if gb == 0.0:
        return RootResult(b, True, 0)
    if (ga < 0.0) == (gb < 0.0):
        return None
    xprev, gprev = a, ga
    xcur, gcur = b, gb
    for it in range(problem.max_iter):
        den = gcur - gprev
        if abs(den) > 1e-300:
            c = xcur - gcur * (xcur - xprev) / den
        else:
            c = 0.5 * (a + b)
        if not (a < c < b) or c == xcur or c == xprev:
            c = 0.5 * (a + b)
        gc = problem.g(c)
        if abs(gc) <= problem.tol_g:
            return RootResult(c, True, it + 1)
        if (gc < 0.0) == (ga < 0.0):
            a, ga = c, gc
        else:
            b, gb = c, gc
        xprev, gprev = xcur, gcur
        xcur, gcur = c, gc
        if b - a <= problem.tol_s:
            return RootResult(0.5 * (a + b), True, it + 1)
    return RootResult(0.5 * (a + b), False, problem.max_iter)


def triangle_update(rule: QuadRule, x1, u1: float, x0, u0: float, x,
                    field: VectorField) -> UpdateCandidate:
    """Interior minimizer of the triangle objective, or +inf.

    x1 and x0 are expected to be nearest neighbors of each other (their
    midpoints with x are the interpolation anchors); u0, u1 finite.
    """
    x1 = (float(x1[0]), float(x1[1]))
    x0 = (float(x0[0]), float(x0[1]))
    x = (float(x[0]), float(x[1]))
    b = eval_b(field, x)
    b0 = eval_b(field, x0)
    b1 = eval_b(field, x1)
    bm0 = eval_b(field, ((x0[0] + x[0]) / 2.0, (x0[1] + x[1]) / 2.0))
    bm1 = eval_b(field, ((x1[0] + x[0]) / 2.0, (x1[1] + x[1]) / 2.0))
    val, s, _warn = _k.triangle_update(
        int(rule), x1[0], x1[1], float(u1), x0[0], x0[1], float(u0),
        x[0], x[1], b[0], b[1], b0[0], b0[1], b1[0], b1[1],
        bm0[0], bm0[1], bm1[0], bm1[1])
    if not math.isfinite(val):
        return UpdateCandidate(math.inf, TRIANGLE)
    return UpdateCandidate(float(val), TRIANGLE, s_star=float(s))


def oum_triangle_update(x1, u1: float, x0, u0: float, x,
                        b) -> UpdateCandidate:
    """Upwind finite-difference triangle update with the characteristic
    consistency check; b is the drift vector at x."""
    val, s = _k.oum_triangle(
        float(x1[0]), float(x1[1]), float(u1),
        float(x0[0]), float(x0[1]), float(u0),
        float(x[0]), float(x[1]), float(b[0]), float(b[1]))
    if not math.isfinite(val):
        return UpdateCandidate(math.inf, TRIANGLE)
    return UpdateCandidate(float(val), TRIANGLE, s_star=float(s))


def triangle_objective(rule: QuadRule, x1, u1, x0, u0, x,
                       field: VectorField) -> Callable[[float], float]:
    """f(s) of the triangle update, with the same interpolated samples the
    solver uses.  Exposed for verification against brute-force scans."""
    x1 = np.asarray(x1, float)
    x0 = np.asarray(x0, float)
    x = np.asarray(x, float)
    b = eval_b(field, x)
    b0 = eval_b(field, x0)
    b1 = eval_b(field, x1)
    bm0 = eval_b(field, (x0 + x) / 2.0)
    bm1 = eval_b(field, (x1 + x) / 2.0)
    e = x - x1
    d = x1 - x0

    def f(s: float) -> float:
        return float(_k._tri_f(int(rule), float(s), float(u1), float(u0),
                               e[0], e[1], d[0], d[1], b[0], b[1],
                               b0[0], b0[1], b1[0], b1[1],
                               bm0[0], bm0[1], bm1[0], bm1[1]))

    return f
