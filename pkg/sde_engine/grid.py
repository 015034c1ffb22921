"""Time grids, Brownian drivers and bridge refinement"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from sde_engine.errors import GridError
from sde_engine.random_streams import Channel, gaussian_block

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_N = T"""

    horizon: float = 1.0
    steps: int = 1000

    def __post_init__(self):
        if self.steps < 2:
            raise GridError(f"Grid needs at least 2 steps, got {self.steps}")
        if not self.horizon > 0:
            raise GridError(f"Horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def index_of(self, t: float) -> int:
        """Nearest grid node to t"""
        if t < 0 or t > self.horizon * (1 + 1e-12):
            raise GridError(f"Time {t} outside [0, {self.horizon}]")
        return int(round(t / self.dt))

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)


@dataclass
class BrownianDriver:
    """
    Discretized driving Brownian motion.

    increments has shape (N, *batch, m); path_indices has shape batch and, with
    seed and level, records where every path's stream came from.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int = 0
    path_indices: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=int))
    level: int = 0

    def __post_init__(self):
        if self.increments.shape[0] != self.grid.steps:
            raise GridError(f"Driver has {self.increments.shape[0]} increments for {self.grid.steps} steps")

    @property
    def m(self) -> int:
        return self.increments.shape[-1]

    @property
    def batch_shape(self):
        return self.increments.shape[1:-1]

    def path(self) -> np.ndarray:
        """B at grid nodes, shape (N+1, *batch, m)"""
        zero = np.zeros((1,) + self.increments.shape[1:])
        return np.concatenate([zero, np.cumsum(self.increments, axis=0)], axis=0)

    def terminal(self) -> np.ndarray:
        return np.sum(self.increments, axis=0)

    def with_increments(self, increments: np.ndarray) -> "BrownianDriver":
        return replace(self, increments=increments)

    def perturbed(self, h_increments: np.ndarray, eps: float) -> "BrownianDriver":
        """Driver B + eps h given the increments of h"""
        return self.with_increments(self.increments + eps * h_increments)

    @classmethod
    def sample(cls, grid: TimeGrid, m: int, seed: int, path_indices: Sequence[int]) -> "BrownianDriver":
        idx = np.asarray(path_indices, dtype=int)
        increments = gaussian_block(seed, idx, Channel.DRIVER, (grid.steps, m), scale=np.sqrt(grid.dt))
        return cls(grid=grid, increments=increments, seed=seed, path_indices=idx, level=0)

    @classmethod
    def zeros(cls, grid: TimeGrid, m: int, n_paths: int = 1) -> "BrownianDriver":
        return cls(grid=grid, increments=np.zeros((grid.steps, n_paths, m)), path_indices=np.arange(n_paths))


def refine_driver(driver: BrownianDriver, levels: int = 1, seed: Optional[int] = None) -> BrownianDriver:
    """
    Halve dt `levels` times by Brownian-bridge midpoint insertion.

    The coarse increments are kept as sums of the fine ones, so drivers at
    different levels are coupled pathwise.
    """
    seed = driver.seed if seed is None else seed
    current = driver
    flat_idx = np.asarray(driver.path_indices, dtype=int).reshape(-1)
    for _ in range(levels):
        grid = current.grid
        level = current.level + 1
        inc = current.increments
        xi = gaussian_block(seed, flat_idx, Channel.BRIDGE, (grid.steps, current.m), scale=1.0, level=level)
        xi = xi.reshape(inc.shape)
        half = 0.5 * inc
        spread = 0.5 * np.sqrt(grid.dt) * xi
        fine = np.empty((2 * grid.steps,) + inc.shape[1:])
        fine[0::2] = half + spread
        fine[1::2] = half - spread
        current = BrownianDriver(
            grid=grid.refined(2),
            increments=fine,
            seed=current.seed,
            path_indices=current.path_indices,
            level=level
        )
    logger.debug(f"Refined driver to {current.grid.steps} steps (level {current.level})")
    return current
