"""Integration of the Stratonovich SDE into solution paths"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geometry.models import ManifoldModel
from sde_engine.errors import RetractionFailure
from sde_engine.grid import BrownianDriver, TimeGrid
from sde_engine.schemes import scheme_for

logger = logging.getLogger(__name__)

RETRACTION_TOL = 1e-6
# Unprojected iterates may sit off the manifold by a multiple of |dB|^2 + dt
PRE_PROJECTION_FACTOR = 10.0


@dataclass
class SolutionPath:
    """Solution x_k at every node for every path in the driver's batch"""

    model: ManifoldModel
    driver: BrownianDriver
    points: np.ndarray

    @property
    def grid(self) -> TimeGrid:
        return self.driver.grid

    @property
    def x0(self) -> np.ndarray:
        return self.points[0]

    @property
    def batch_shape(self):
        return self.points.shape[1:-1]

    def terminal(self) -> np.ndarray:
        return self.points[-1]


def integrate(model: ManifoldModel, x0: Optional[np.ndarray], driver: BrownianDriver) -> SolutionPath:
    """
    Integrate dx = X(x) o dB + A(x) dt along every path of the driver.

    Args:
        model: Manifold model
        x0: Starting point (defaults to the model base point)
        driver: Brownian increments, shape (N, *batch, m)

    Returns:
        SolutionPath with points of shape (N+1, *batch, d)
    """
    x0 = model.base_point if x0 is None else np.asarray(x0, dtype=float)
    model.check_point(x0)
    if driver.m != model.m:
        raise ValueError(f"Driver dimension {driver.m} does not match model noise dimension {model.m}")

    scheme = scheme_for(model)
    grid = driver.grid
    dt = grid.dt
    points = np.empty((grid.steps + 1,) + driver.batch_shape + (model.d,))
    points[0] = x0
    x = points[0]
    for k in range(grid.steps):
        db = driver.increments[k]
        x, y = scheme.step(x, db, dt)
        bound = RETRACTION_TOL + PRE_PROJECTION_FACTOR * (float(np.max(np.sum(db * db, axis=-1), initial=0.0)) + dt)
        pre = float(np.max(model.constraint_residual(y), initial=0.0))
        post = float(np.max(model.constraint_residual(x), initial=0.0))
        if post > RETRACTION_TOL or pre > bound:
            raise RetractionFailure(f"Step {k}: residual {post:.3e} after projection, {pre:.3e} before (bound {bound:.3e})")
        points[k + 1] = x
    return SolutionPath(model=model, driver=driver, points=points)


def select_path(path: SolutionPath, index) -> SolutionPath:
    """Single path (or sub-batch) of a batched solution"""
    idx = (slice(None),) + (index if isinstance(index, tuple) else (index,))
    driver = path.driver
    sub = BrownianDriver(
        grid=driver.grid,
        increments=driver.increments[idx],
        seed=driver.seed,
        path_indices=np.asarray(driver.path_indices)[idx[1:]],
        level=driver.level
    )
    return SolutionPath(model=path.model, driver=sub, points=path.points[idx])
