import math

import numpy as np
import pytest

import quasipot as qp
from quasipot import QuadRule, RootProblem
from quasipot import _kernels as _k

ALL_RULES = list(QuadRule)


class TestOnePoint:
    def test_zero_field_returns_source_value(self):
        fld = qp.parse_field("0", "0")
        for rule in ALL_RULES:
            c = qp.one_point_update(rule, (0.2, 0.3), 0.7, (0.9, -0.4), fld)
            assert c.value == pytest.approx(0.7, abs=1e-15)

    def test_gradient_field_midpoint_exact(self, gradient_field):
        c = qp.one_point_update(QuadRule.MIDPOINT, (0, 0), 0.0, (1, 0),
                                gradient_field)
        assert c.value == pytest.approx(2.0, abs=1e-14)
        assert c.kind == "one-point"

    def test_gradient_field_right_hand(self, gradient_field):
        c = qp.one_point_update(QuadRule.RIGHT_HAND, (0, 0), 0.0, (1, 0),
                                gradient_field)
        assert c.value == pytest.approx(4.0, abs=1e-14)


class TestHybridRoot:
    def test_linear(self):
        r = qp.hybrid_root(RootProblem(lambda s: s - 0.5))
        assert r is not None and r.s == pytest.approx(0.5, abs=1e-10)

    def test_quadratic(self):
        r = qp.hybrid_root(RootProblem(lambda s: s * s - 0.25))
        assert r is not None and r.s == pytest.approx(0.5, abs=1e-10)

    def test_no_sign_change(self):
        assert qp.hybrid_root(RootProblem(lambda s: s * s + 1.0)) is None

    def test_root_at_endpoint(self):
        r = qp.hybrid_root(RootProblem(lambda s: s))
        assert r is not None and r.s == 0.0

    def test_exhaustion_returns_midpoint_with_flag(self):
        # kinked, steep function with zero tolerances forces max-iteration
        prob = RootProblem(lambda s: math.copysign(1.0, s - 1 / math.pi)
                           * abs(s - 1 / math.pi) ** 0.1,
                           tol_s=0.0, tol_g=0.0, max_iter=8)
        r = qp.hybrid_root(prob)
        assert r is not None
        assert not r.converged
        assert 0.0 < r.s < 1.0

    def test_bracket_maintained_on_nasty_secant(self):
        # secant steps would fly far outside [0, 1] here
        r = qp.hybrid_root(RootProblem(lambda s: math.tan(s - 0.3) * 1e6,
                                       tol_g=1e-6))
        assert r is not None and r.s == pytest.approx(0.3, abs=1e-6)


class TestTriangleSymmetric:
    """Symmetric triangle: base (0,0)-(1,0), apex (0.5, 1)."""

    X1, X0, X = (0.0, 0.0), (1.0, 0.0), (0.5, 1.0)

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_flow_toward_apex_costs_nothing(self, rule):
        fld = qp.parse_field("0", "1")
        c = qp.triangle_update(rule, self.X1, 0.0, self.X0, 0.0, self.X, fld)
        assert c.finite
        assert c.value == pytest.approx(0.0, abs=1e-9)
        assert c.s_star == pytest.approx(0.5, abs=1e-5)

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_flow_away_from_apex_costs_double(self, rule):
        fld = qp.parse_field("0", "-1")
        c = qp.triangle_update(rule, self.X1, 0.0, self.X0, 0.0, self.X, fld)
        assert c.finite
        assert c.value == pytest.approx(2.0, rel=1e-9)
        assert c.s_star == pytest.approx(0.5, abs=1e-9)

    def test_degenerate_collinear_oum(self):
        c = qp.oum_triangle_update((0, 0), 0.0, (1, 0), 0.0, (2, 0), (0, 1))
        assert not c.finite

    def test_oum_matches_hand_values(self):
        up = qp.oum_triangle_update(self.X1, 0.0, self.X0, 0.0, self.X,
                                    (0.0, -1.0))
        assert up.value == pytest.approx(2.0, rel=1e-12)
        down = qp.oum_triangle_update(self.X1, 0.0, self.X0, 0.0, self.X,
                                      (0.0, 1.0))
        assert down.value == pytest.approx(0.0, abs=1e-12)


def _random_instance(rng, spread=1.0):
    x1 = rng.normal(size=2)
    x0 = x1 + rng.normal(size=2) * 0.5
    x = rng.normal(size=2) * 1.5
    u1, u0 = rng.random() * 2, rng.random() * 2
    b = rng.normal(size=2) * spread
    return x1, u1, x0, u0, x, b


class TestTheorem1Equivalence:
    """Right-hand quadrature triangle vs upwind finite differences."""

    def test_cross_oracle(self):
        rng = np.random.default_rng(42)
        both = one_sided = 0
        for _ in range(4000):
            x1, u1, x0, u0, x, b = _random_instance(rng, 2.0)
            vR, sR, _ = _k.triangle_update(
                0, x1[0], x1[1], u1, x0[0], x0[1], u0, x[0], x[1],
                b[0], b[1], b[0], b[1], b[0], b[1], b[0], b[1], b[0], b[1])
            vO, sO = _k.oum_triangle(x1[0], x1[1], u1, x0[0], x0[1], u0,
                                     x[0], x[1], b[0], b[1])
            fR, fO = math.isfinite(vR), math.isfinite(vO)
            if fR and fO:
                both += 1
                assert abs(vR - vO) <= 1e-9 * (1 + abs(vO))
                assert 0 < sR < 1
                assert abs(sR - sO) <= 1e-6
            elif fR != fO:
                one_sided += 1
        assert both > 200
        assert one_sided == 0


class TestTriangleProperties:
    def test_monotone_lower_bound(self):
        rng = np.random.default_rng(7)
        fld = qp.parse_field("x2 + 0.3*sin(x1) + 2", "1.5 - 0.2*x1")
        for _ in range(200):
            x1, u1, x0, u0, x, _ = _random_instance(rng)
            for rule in ALL_RULES:
                c = qp.triangle_update(rule, x1, u1, x0, u0, x, fld)
                if c.finite:
                    assert c.value >= min(u0, u1) - 1e-12

    def test_translation_invariance_constant_field(self):
        rng = np.random.default_rng(8)
        fld = qp.parse_field("1.2", "-0.7")
        for _ in range(100):
            x1, u1, x0, u0, x, _ = _random_instance(rng)
            shift = rng.normal(size=2) * 3
            for rule in ALL_RULES:
                a = qp.triangle_update(rule, x1, u1, x0, u0, x, fld)
                b = qp.triangle_update(rule, x1 + shift, u1, x0 + shift,
                                       u0, x + shift, fld)
                if a.finite or b.finite:
                    assert a.finite and b.finite
                    assert abs(a.value - b.value) <= 1e-12 * (1 + a.value)

    def test_oum_rotation_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            x1, u1, x0, u0, x, b = _random_instance(rng, 2.0)
            th = rng.uniform(0, 2 * math.pi)
            R = np.array([[math.cos(th), -math.sin(th)],
                          [math.sin(th), math.cos(th)]])
            a = qp.oum_triangle_update(x1, u1, x0, u0, x, b)
            c = qp.oum_triangle_update(R @ x1, u1, R @ x0, u0, R @ x, R @ b)
            if a.finite or c.finite:
                assert a.finite and c.finite
                assert abs(a.value - c.value) <= 1e-10 * (1 + abs(a.value))

    def test_value_never_above_endpoints(self):
        # f(s*) <= min(f(0), f(1)) whenever a candidate is returned
        rng = np.random.default_rng(10)
        fld = qp.parse_field("x2 + 0.4*cos(x1) + 2", "2 - 0.3*x1")
        for _ in range(300):
            x1, u1, x0, u0, x, _ = _random_instance(rng)
            for rule in ALL_RULES:
                c = qp.triangle_update(rule, x1, u1, x0, u0, x, fld)
                if not c.finite:
                    continue
                f = qp.updates.triangle_objective(rule, x1, u1, x0, u0, x,
                                                  fld)
                assert c.value <= min(f(0.0), f(1.0)) + 1e-10


class TestTriangleBruteForce:
    """Dense-scan oracle over the triangle objective."""

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_interior_minima_found(self, rule):
        rng = np.random.default_rng(11)
        fld = qp.parse_field("x2 + 0.5*sin(x1) + 3", "2.5 - 0.4*x1 + 0.2*x2")
        ss = np.linspace(0, 1, 4001)
        misses = 0
        for _ in range(300):
            x1, u1, x0, u0, x, _ = _random_instance(rng)
            f = qp.updates.triangle_objective(rule, x1, u1, x0, u0, x, fld)
            fs = np.array([f(s) for s in ss])
            i = int(np.argmin(fs))
            c = qp.triangle_update(rule, x1, u1, x0, u0, x, fld)
            if 0 < i < len(ss) - 1 and fs[i] < min(fs[0], fs[-1]) - 1e-9:
                if not c.finite:
                    misses += 1
                    continue
                assert c.value == pytest.approx(fs[i], abs=1e-6)
            elif c.finite:
                # interior candidate must not be worse than the endpoints
                assert c.value <= min(fs[0], fs[-1]) + 1e-7
        assert misses == 0
