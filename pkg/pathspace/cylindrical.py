"""Cylindrical functions on path space and their H-differential"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from pathspace.errors import OffGridError
from sde_engine.grid import TimeGrid
from sde_engine.integrator import SolutionPath

logger = logging.getLogger(__name__)

Marginals = List[np.ndarray]


@dataclass
class CylindricalFunction:
    """
    f(sigma) = g(sigma(t_1), ..., sigma(t_k)) with times snapped to grid nodes.

    g maps the list of marginals to values; differential maps them to the list of
    ambient differentials d_i g, one per marginal.
    """

    grid: TimeGrid
    indices: Sequence[int]
    g: Callable[[Marginals], np.ndarray]
    differential: Callable[[Marginals], Marginals]
    label: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.indices) * self.grid.dt

    def marginals(self, points: np.ndarray) -> Marginals:
        return [points[i] for i in self.indices]

    def _check(self, path: SolutionPath):
        if path.grid != self.grid:
            raise OffGridError(f"Function {self.label} lives on {self.grid}, path on {path.grid}")

    def value(self, path: SolutionPath) -> np.ndarray:
        self._check(path)
        return self.g(self.marginals(path.points))

    def value_at(self, points: np.ndarray) -> np.ndarray:
        return self.g(self.marginals(points))

    def gradients(self, path: SolutionPath) -> Marginals:
        """Metric gradients grad_i g at sigma(t_i)"""
        self._check(path)
        diffs = self.differential(self.marginals(path.points))
        return [path.model.gradient(path.points[i], c) for i, c in zip(self.indices, diffs)]


def _snap(grid: TimeGrid, times: Sequence[float]) -> List[int]:
    return [grid.index_of(t) for t in times]


def constant(grid: TimeGrid, c: float) -> CylindricalFunction:
    def g(ms):
        return np.full(ms[0].shape[:-1], float(c))

    def dg(ms):
        return [np.zeros_like(ms[0])]

    return CylindricalFunction(grid, [grid.steps], g, dg, label="constant")


def linear_marginal(grid: TimeGrid, t: float, c: np.ndarray) -> CylindricalFunction:
    """f(sigma) = <sigma(t), c>"""
    c = np.asarray(c, dtype=float)

    def g(ms):
        return np.sum(ms[0] * c, axis=-1)

    def dg(ms):
        return [np.broadcast_to(c, ms[0].shape)]

    return CylindricalFunction(grid, _snap(grid, [t]), g, dg, label=f"linear@{t}")


def product_of_marginals(grid: TimeGrid, t1: float, c1: np.ndarray, t2: float, c2: np.ndarray) -> CylindricalFunction:
    """f(sigma) = <sigma(t1), c1> <sigma(t2), c2>"""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)

    def g(ms):
        return np.sum(ms[0] * c1, axis=-1) * np.sum(ms[1] * c2, axis=-1)

    def dg(ms):
        a = np.sum(ms[0] * c1, axis=-1, keepdims=True)
        b = np.sum(ms[1] * c2, axis=-1, keepdims=True)
        return [b * c1, a * c2]

    return CylindricalFunction(grid, _snap(grid, [t1, t2]), g, dg, label=f"product@{t1},{t2}")


def exp_of_marginal(grid: TimeGrid, t: float, c: np.ndarray) -> CylindricalFunction:
    """f(sigma) = exp(<sigma(t), c>)"""
    c = np.asarray(c, dtype=float)

    def g(ms):
        return np.exp(np.sum(ms[0] * c, axis=-1))

    def dg(ms):
        return [np.exp(np.sum(ms[0] * c, axis=-1, keepdims=True)) * c]

    return CylindricalFunction(grid, _snap(grid, [t]), g, dg, label=f"exp@{t}")


def cylindrical_dH(f: CylindricalFunction, path: SolutionPath, v: np.ndarray) -> np.ndarray:
    """
    (d_H f)(v) = sum_i <grad_i g, v_{t_i}>.

    Args:
        f: Cylindrical function on the path's grid
        path: Solution path
        v: Field values along the path, shape (N+1, *batch, d)

    Returns:
        One value per path
    """
    model = path.model
    total = 0.0
    for i, grad in zip(f.indices, f.gradients(path)):
        total = total + model.inner(grad, v[i])
    return np.broadcast_to(total, path.batch_shape) if np.ndim(total) == 0 else total
