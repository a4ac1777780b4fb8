"""Single-panel quadrature of the geometric-action integrand along segments.

The integrand of the action is ||b|| - b.v along a straight segment with
unit direction v; it is nonnegative by Cauchy-Schwarz.  Four basic rules
are supported (right-hand rectangle, midpoint, trapezoid, Simpson).  Inside
triangle updates the samples at the segment start/midpoint are *linearly
interpolated* between prefetched values rather than re-evaluated from the
field; :class:`SegmentSamples` carries whatever samples a rule needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels as _k
from .field import VectorField, eval_b, eval_b_many


class QuadRule(IntEnum):
    """Basic quadrature rule; values match the kernel codes."""

    RIGHT_HAND = _k.RULE_R
    MIDPOINT = _k.RULE_MID
    TRAPEZOID = _k.RULE_TR
    SIMPSON = _k.RULE_SIM


@dataclass(frozen=True)
class SegmentSamples:
    """Field samples along the segment x_start -> x_end.

    ``b_end`` is always required; ``b_start`` feeds the trapezoid/Simpson
    rules and ``b_mid`` the midpoint/Simpson rules.  Unused samples may be
    left as zeros.
    """

    x_start: tuple[float, float]
    x_end: tuple[float, float]
    b_end: tuple[float, float]
    b_start: tuple[float, float] = (0.0, 0.0)
    b_mid: tuple[float, float] = (0.0, 0.0)


def samples_from_field(field: VectorField, x_start, x_end) -> SegmentSamples:
    """Samples with the true field evaluated at the quadrature nodes
    (the one-point-update convention)."""
    xs = (float(x_start[0]), float(x_start[1]))
    xe = (float(x_end[0]), float(x_end[1]))
    mid = (0.5 * (xs[0] + xe[0]), 0.5 * (xs[1] + xe[1]))
    be = eval_b(field, xe)
    bs = eval_b(field, xs)
    bm = eval_b(field, mid)
    return SegmentSamples(xs, xe, (be[0], be[1]), (bs[0], bs[1]),
                          (bm[0], bm[1]))


def integrand(b, v) -> float:
    """||b|| - b.v for a unit direction v; nonnegative."""
    bx, by = float(b[0]), float(b[1])
    return math.hypot(bx, by) - (bx * float(v[0]) + by * float(v[1]))


def segment_action(rule: QuadRule, samples: SegmentSamples) -> float:
    """Action of the straight segment under the given rule; >= 0.

    Zero-length segments contribute zero.
    """
    dx = samples.x_end[0] - samples.x_start[0]
    dy = samples.x_end[1] - samples.x_start[1]
    return float(_k.seg_action(int(rule), dx, dy,
                               samples.b_end[0], samples.b_end[1],
                               samples.b_start[0], samples.b_start[1],
                               samples.b_mid[0], samples.b_mid[1]))


class ExactWithinRoundoff(RuntimeError):
    """The rule reproduces the reference integral to round-off at every
    probed length, so no order can be fitted."""


def reference_action(field: VectorField, x_start, x_end,
                     n_panels: int = 16384) -> float:
    """Composite-Simpson reference value of the segment action.

    Used as the independent oracle for the empirical order checks;
    ``n_panels`` must be even and is at least 10^4 by default.
    """
    xs = np.asarray(x_start, dtype=float)
    xe = np.asarray(x_end, dtype=float)
    d = xe - xs
    ell = math.hypot(d[0], d[1])
    if ell == 0.0:
        return 0.0
    v = d / ell
    t = np.linspace(0.0, 1.0, n_panels + 1)
    pts = xs[None, :] + t[:, None] * d[None, :]
    b = eval_b_many(field, pts)
    f = np.hypot(b[:, 0], b[:, 1]) - b @ v
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((ell / n_panels) / 3.0 * (w @ f))


def empirical_order(rule: QuadRule, field: VectorField, x0, direction,
                    lengths=None) -> float:
    """Fitted exponent p of the local error |rule - reference| ~ l^p.

    Probes a decreasing sequence of segment lengths from ``x0`` along the
    unit ``direction`` (field-sampled nodes, as in one-point updates) and
    fits p by least squares on the log-log data.  Raises
    :class:`ExactWithinRoundoff` when every probed error is below 1e-14
    relative to the reference scale.
    """
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(direction, dtype=float)
    v = v / math.hypot(v[0], v[1])
    if lengths is None:
        # the ladder must sit between the asymptotic regime (small l) and
        # the round-off floor; Simpson errors decay like l^5, so its probes
        # start larger
        base = 0.15 if rule == QuadRule.SIMPSON else 0.2
        lengths = [base * 0.5 ** k for k in range(4)]
    errs = []
    scale = 0.0
    for ell in lengths:
        xe = x0 + ell * v
        approx = segment_action(rule, samples_from_field(field, x0, xe))
        ref = reference_action(field, x0, xe)
        errs.append(abs(approx - ref))
        scale = max(scale, abs(ref), 1e-30)
    errs = np.asarray(errs)
    if np.all(errs <= 1e-14 * max(1.0, scale)):
        raise ExactWithinRoundoff(
            f"{rule.name} is exact within round-off on this segment family")
    # guard the log against exact zeros at individual lengths
    errs = np.maximum(errs, 1e-300)
    slope = np.polyfit(np.log(np.asarray(lengths, dtype=float)),
                       np.log(errs), 1)[0]
    return float(slope)
