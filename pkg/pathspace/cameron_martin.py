"""Cameron-Martin directions on the flat driver space"""
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import trapezoid

from sde_engine.errors import GridError
from sde_engine.grid import TimeGrid


@dataclass
class CameronMartinVector:
    """
    Direction h in H = L^{2,1}_0(R^m), stored by its slope at every grid node.

    slopes has shape (N+1, *batch, m). The H norm is the trapezoid integral of
    |h'|^2; the driver perturbation uses the step slopes (h'_k + h'_{k+1})/2.
    """

    grid: TimeGrid
    slopes: np.ndarray

    def __post_init__(self):
        self.slopes = np.asarray(self.slopes, dtype=float)
        if self.slopes.shape[0] != self.grid.steps + 1:
            raise GridError(f"Expected {self.grid.steps + 1} slope nodes, got {self.slopes.shape[0]}")

    @property
    def m(self) -> int:
        return self.slopes.shape[-1]

    def step_slopes(self) -> np.ndarray:
        return 0.5 * (self.slopes[:-1] + self.slopes[1:])

    def increments(self) -> np.ndarray:
        return self.step_slopes() * self.grid.dt

    def values(self) -> np.ndarray:
        """h at grid nodes"""
        inc = self.increments()
        zero = np.zeros((1,) + inc.shape[1:])
        return np.concatenate([zero, np.cumsum(inc, axis=0)], axis=0)

    def norm_sq(self) -> np.ndarray:
        return trapezoid(np.sum(self.slopes ** 2, axis=-1), dx=self.grid.dt, axis=0)

    def step_energy(self) -> np.ndarray:
        """sum_k |step slope|^2 dt, the exact energy of the piecewise-linear driver shift"""
        return np.sum(np.sum(self.step_slopes() ** 2, axis=-1), axis=0) * self.grid.dt

    def along(self, batch_shape: Tuple[int, ...], steps: bool = False) -> np.ndarray:
        """
        Node slopes (or step slopes) broadcast to (T, *batch_shape, m).

        A direction shared by every path has slopes (N+1, m); the batch axes are
        inserted after the time axis.
        """
        s = self.step_slopes() if steps else self.slopes
        batch_shape = tuple(batch_shape)
        extra = len(batch_shape) - (s.ndim - 2)
        s = s.reshape(s.shape[:1] + (1,) * extra + s.shape[1:])
        return np.broadcast_to(s, s.shape[:1] + batch_shape + s.shape[-1:])

    def scaled(self, c: float) -> "CameronMartinVector":
        return CameronMartinVector(self.grid, c * self.slopes)

    def __add__(self, other: "CameronMartinVector") -> "CameronMartinVector":
        return CameronMartinVector(self.grid, self.slopes + other.slopes)

    @classmethod
    def zeros(cls, grid: TimeGrid, m: int) -> "CameronMartinVector":
        return cls(grid, np.zeros((grid.steps + 1, m)))

    @classmethod
    def constant(cls, grid: TimeGrid, c) -> "CameronMartinVector":
        c = np.asarray(c, dtype=float)
        return cls(grid, np.broadcast_to(c, (grid.steps + 1,) + c.shape).copy())

    @classmethod
    def from_function(cls, grid: TimeGrid, slope: Callable[[np.ndarray], np.ndarray]) -> "CameronMartinVector":
        """slope maps the node times (N+1,) to slopes (N+1, m)"""
        return cls(grid, np.asarray(slope(grid.times), dtype=float))

    @classmethod
    def from_step_slopes(cls, grid: TimeGrid, step_slopes: np.ndarray) -> "CameronMartinVector":
        """
        Node representation of a piecewise-constant slope.

        Interior nodes take the mean of the adjacent steps; the trapezoid norm of
        the result equals sum_k |s_k|^2 dt when consecutive slopes agree.
        """
        s = np.asarray(step_slopes, dtype=float)
        if s.shape[0] != grid.steps:
            raise GridError(f"Expected {grid.steps} step slopes, got {s.shape[0]}")
        nodes = np.empty((grid.steps + 1,) + s.shape[1:])
        nodes[0] = s[0]
        nodes[-1] = s[-1]
        nodes[1:-1] = 0.5 * (s[:-1] + s[1:])
        return cls(grid, nodes)
