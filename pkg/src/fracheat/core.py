"""Grids, space-time fields and the trapezoid quadrature shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i T / N`` on ``[0, T]``."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"steps N must be a positive integer, got {self.N}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Return ``i`` with ``t_i == t``; raise if ``t`` is not a grid node."""
        i = int(round(t / self.dt))
        if i < 0 or i > self.N or abs(i * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"t={t} is not a node of the time grid")
        return i


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid of ``M`` points on ``[-L, L]`` that contains 0 as a node.

    ``M`` must be odd, otherwise 0 cannot sit on a symmetric uniform grid.
    """

    L: float
    M: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"half-width L must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"a space grid needs at least 2 points, got M={self.M}")
        if self.M % 2 == 0:
            raise ValueError(f"M={self.M} is even; 0 would not be a grid node")

    @property
    def dx(self) -> float:
        return 2 * self.L / (self.M - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        k = np.arange(self.M) - (self.M - 1) // 2
        return k * self.dx

    @property
    def zero_index(self) -> int:
        return (self.M - 1) // 2


def quad_weights(grid: SpaceGrid) -> np.ndarray:
    """Composite trapezoid weights on ``grid``; they sum to ``2L``."""
    if grid.M < 2:
        raise ValueError("degenerate grid")
    w = np.full(grid.M, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    return w


def l2_norm(values, grid: SpaceGrid) -> float:
    """Discrete L2 norm ``sqrt(sum_k w_k v_k^2)`` of one space row."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != grid.M:
        raise ValueError(f"row has {v.shape[-1]} values, grid has {grid.M} points")
    return float(l2_norms(v, grid))


def l2_norms(rows, grid: SpaceGrid) -> np.ndarray:
    """Row-wise version of :func:`l2_norm` for a stack of rows."""
    v = np.asarray(rows, dtype=float)
    if v.shape[-1] != grid.M:
        raise ValueError(f"rows have {v.shape[-1]} values, grid has {grid.M} points")
    # scale by the row maximum so tiny or huge rows neither underflow nor overflow
    scale = np.max(np.abs(v), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    r = v / safe
    return safe[..., 0] * np.sqrt(np.sum(quad_weights(grid) * r * r, axis=-1))


def default_half_width(T: float, a_max: float, rel: float = 1e-12) -> float:
    """Smallest ``L`` with ``exp(-L^2 / (2 T a_max)) <= rel``."""
    return float(np.sqrt(-2.0 * T * a_max * np.log(rel)))


@dataclass(frozen=True)
class SpaceTimeField:
    """Values ``u(t_i, x_k)`` on the product of a time and a space grid."""

    values: np.ndarray
    tgrid: TimeGrid
    xgrid: SpaceGrid
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.tgrid.N + 1, self.xgrid.M):
            raise ValueError(
                f"values shape {v.shape} does not match grids "
                f"({self.tgrid.N + 1}, {self.xgrid.M})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, tgrid: TimeGrid, xgrid: SpaceGrid) -> "SpaceTimeField":
        return cls(np.zeros((tgrid.N + 1, xgrid.M)), tgrid, xgrid)

    @classmethod
    def from_function(cls, fun, tgrid: TimeGrid, xgrid: SpaceGrid) -> "SpaceTimeField":
        """Sample ``fun(t, x)`` (broadcasting) on the product grid."""
        t = tgrid.nodes[:, None]
        x = xgrid.nodes[None, :]
        return cls(np.broadcast_to(fun(t, x), (tgrid.N + 1, xgrid.M)).copy(), tgrid, xgrid)

    def same_grids(self, other: "SpaceTimeField") -> bool:
        return self.tgrid == other.tgrid and self.xgrid == other.xgrid

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        if not self.same_grids(other):
            raise ValueError("fields live on different grids")
        return SpaceTimeField(self.values - other.values, self.tgrid, self.xgrid)

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        if not self.same_grids(other):
            raise ValueError("fields live on different grids")
        return SpaceTimeField(self.values + other.values, self.tgrid, self.xgrid)

    def scaled(self, c: float) -> "SpaceTimeField":
        return SpaceTimeField(c * self.values, self.tgrid, self.xgrid)

    def row_norms(self) -> np.ndarray:
        """``||u(t_i, .)||_2`` for every time node."""
        return l2_norms(self.values, self.xgrid)


@dataclass
class CheckRecord:
    """One empirical bound-check result.

    ``sup_ratio`` is the largest observed ratio of a left-hand side to the
    shape of its bound; ``passed`` is the check's flag and ``reason`` is set
    when the check could not run at all.
    """

    name: str
    probe_count: int
    sup_ratio: float
    passed: bool
    details: dict = field(default_factory=dict)
    reason: str | None = None

    @classmethod
    def rejected(cls, name: str, reason: str) -> "CheckRecord":
        return cls(name, 0, float("nan"), False, {}, reason)

    def to_dict(self) -> dict:
        ratio = self.sup_ratio
        return {
            "name": self.name,
            "probe_count": int(self.probe_count),
            "sup_ratio": None if ratio != ratio else float(ratio),
            "passed": bool(self.passed),
            "reason": self.reason,
            **({"details": self.details} if self.details else {}),
        }
