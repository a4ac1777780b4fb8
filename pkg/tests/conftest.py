import numpy as np
import pytest

import quasipot as qp


@pytest.fixture(scope="session")
def linear_field():
    return qp.make_linear(10.0)


@pytest.fixture(scope="session")
def cycle_field():
    return qp.make_limit_cycle()


@pytest.fixture(scope="session")
def gradient_field():
    # b = -grad(x1^2 + x2^2/2): the linear benchmark with no rotation
    return qp.make_linear(0.0)


@pytest.fixture(scope="session")
def circle720():
    return qp.unit_circle_polyline(720)


@pytest.fixture(scope="session")
def small_linear_solution(linear_field):
    """Shared 64x64 OLIM-R solve of the linear benchmark."""
    mesh = qp.Mesh(-1, 1, -1, 1, 64, 64)
    cfg = qp.SolverConfig(method="olim-r", K=3,
                          init=qp.PointInit((0.0, 0.0)))
    return qp.solve(mesh, linear_field, cfg)


def assert_close(a, b, tol, msg=""):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    assert np.all(np.abs(a - b) <= tol), \
        f"{msg}: {a} vs {b} (tol {tol})"
