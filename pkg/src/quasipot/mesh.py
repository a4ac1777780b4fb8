"""Regular rectangular mesh: geometry, indexing, neighborhoods, point states.

Linearization is row-major with the x1 index as the slow axis:
``index(i, j) == i * n2 + j``.  All binary grid dumps use this order.

The 8-neighborhood is enumerated clockwise starting from North
(N, NE, E, SE, S, SW, W, NW), where North is the +x2 direction and East
is the +x1 direction.  The fixed order makes tie-breaking downstream
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# (di, dj) offsets, clockwise from N
NEIGHBOR_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1),
                    (0, -1), (-1, -1), (-1, 0), (-1, 1))

# Relative slack applied to the inclusive radius test so that points at
# distance exactly r survive floating-point noise.
RADIUS_SLACK = 1e-12


class PointState(IntEnum):
    """Solver state of a mesh point.

    Legal transitions only ever move forward:
    UNKNOWN -> CONSIDERED -> ACCEPTED_FRONT -> ACCEPTED.
    """

    UNKNOWN = 0
    CONSIDERED = 1
    ACCEPTED_FRONT = 2
    ACCEPTED = 3


@dataclass(frozen=True)
class Mesh:
    """Regular rectangular mesh on [x1_min, x1_max] x [x2_min, x2_max].

    n1, n2 are point counts per axis (>= 2); steps are
    h1 = (x1_max - x1_min)/(n1 - 1) and likewise h2; h = max(h1, h2).
    Immutable and safe to share between threads.
    """

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("mesh needs at least 2 points per axis")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError("mesh bounds must have positive extent")

    @property
    def h1(self) -> float:
        return (self.x1_max - self.x1_min) / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return (self.x2_max - self.x2_min) / (self.n2 - 1)

    @property
    def h(self) -> float:
        return max(self.h1, self.h2)

    @property
    def n_points(self) -> int:
        return self.n1 * self.n2

    def index(self, i: int, j: int) -> int:
        """Row-major linear index of the point (i, j)."""
        if not (0 <= i < self.n1 and 0 <= j < self.n2):
            raise IndexError(f"mesh index ({i}, {j}) out of range "
                             f"({self.n1} x {self.n2})")
        return i * self.n2 + j

    def ij(self, idx: int) -> tuple[int, int]:
        """Inverse of :meth:`index`."""
        if not (0 <= idx < self.n_points):
            raise IndexError(f"linear index {idx} out of range")
        return divmod(idx, self.n2)

    def coordinate(self, idx: int) -> tuple[float, float]:
        """Physical coordinates of a linear index."""
        i, j = self.ij(idx)
        return (self.x1_min + i * self.h1, self.x2_min + j * self.h2)

    def coordinates(self) -> np.ndarray:
        """(n_points, 2) array of all point coordinates in linear order."""
        i = np.arange(self.n1)
        j = np.arange(self.n2)
        x1 = self.x1_min + i * self.h1
        x2 = self.x2_min + j * self.h2
        out = np.empty((self.n1, self.n2, 2))
        out[:, :, 0] = x1[:, None]
        out[:, :, 1] = x2[None, :]
        return out.reshape(-1, 2)

    def is_boundary(self, idx: int) -> bool:
        i, j = self.ij(idx)
        return i == 0 or i == self.n1 - 1 or j == 0 or j == self.n2 - 1

    def contains(self, x1: float, x2: float) -> bool:
        return (self.x1_min <= x1 <= self.x1_max
                and self.x2_min <= x2 <= self.x2_max)

    def neighbors8(self, idx: int) -> list[int]:
        """In-bounds 8-neighborhood, clockwise from N (see module docstring)."""
        i, j = self.ij(idx)
        out = []
        for di, dj in NEIGHBOR_OFFSETS:
            ii, jj = i + di, j + dj
            if 0 <= ii < self.n1 and 0 <= jj < self.n2:
                out.append(ii * self.n2 + jj)
        return out

    def points_within_radius(self, idx: int, r: float) -> list[int]:
        """All in-bounds points y != idx with ||y - x|| <= r (inclusive).

        Scans only the bounding box of half-width r around the point, in
        ascending linear-index order.
        """
        if r < 0:
            raise ValueError("radius must be nonnegative")
        i, j = self.ij(idx)
        # one extra ring guards against truncation of r/h at exact multiples;
        # the distance test below does the real filtering
        di_max = int(r / self.h1 + RADIUS_SLACK) + 1
        dj_max = int(r / self.h2 + RADIUS_SLACK) + 1
        r2 = r * r * (1.0 + RADIUS_SLACK)
        out = []
        for ii in range(max(0, i - di_max), min(self.n1, i + di_max + 1)):
            dx1 = (ii - i) * self.h1
            for jj in range(max(0, j - dj_max), min(self.n2, j + dj_max + 1)):
                if ii == i and jj == j:
                    continue
                dx2 = (jj - j) * self.h2
                if dx1 * dx1 + dx2 * dx2 <= r2:
                    out.append(ii * self.n2 + jj)
        return out


class StateGrid:
    """Per-point state, tentative value and acceptance order for one solve.

    Enforces the legal transition chain on every :meth:`set_state` call and
    the rule that a point holds a finite tentative value iff its state is
    at least CONSIDERED.  Mutated by exactly one solver at a time.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.state = np.zeros(mesh.n_points, dtype=np.uint8)
        self.value = np.full(mesh.n_points, np.inf)
        self.accept_order = np.full(mesh.n_points, -1, dtype=np.int64)

    def set_state(self, idx: int, new: PointState) -> None:
        old = self.state[idx]
        if new != old + 1:
            raise ValueError(
                f"illegal state transition {PointState(old).name} -> "
                f"{PointState(new).name} at point {idx}")
        if new == PointState.CONSIDERED and not math.isfinite(self.value[idx]):
            raise ValueError(f"point {idx} becomes CONSIDERED without a value")
        self.state[idx] = int(new)

    def set_value(self, idx: int, value: float) -> None:
        if value < 0:
            raise ValueError("tentative values are nonnegative")
        if self.state[idx] >= PointState.ACCEPTED_FRONT:
            raise ValueError(f"point {idx} is final; value can not change")
        self.value[idx] = value

    def front_has_considered_neighbor(self, idx: int) -> bool:
        return any(self.state[n] == PointState.CONSIDERED
                   for n in self.mesh.neighbors8(idx))
