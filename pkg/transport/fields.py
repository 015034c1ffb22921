"""Vector fields along paths, the isometry W and the damped covariant derivative"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from sde_engine.integrator import SolutionPath
from transport.errors import GridTooCoarse
from transport.frames import TransportFrame

logger = logging.getLogger(__name__)

MIN_STEPS_FOR_DERIVATIVE = 4


@dataclass
class PathVectorField:
    """Tangent vectors v_k at every node, shape (N+1, *batch, d), optional density"""

    values: np.ndarray
    density: Optional[np.ndarray] = None

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    def scaled(self, c: float) -> "PathVectorField":
        density = None if self.density is None else c * self.density
        return PathVectorField(c * self.values, density)

    def tangency_residual(self, path: SolutionPath) -> float:
        return float(np.max(path.model.tangent_residual(path.points, self.values), initial=0.0))


def l2_norm_sq(path: SolutionPath, density: np.ndarray) -> np.ndarray:
    """Trapezoid integral of |u_k|^2 in the model metric"""
    return trapezoid(path.model.inner(density, density), dx=path.grid.dt, axis=0)


def script_W(path: SolutionPath, frame: TransportFrame, density: np.ndarray) -> PathVectorField:
    """
    The isometry W from L^2 densities to Bismut tangent vectors.

    W(u)_t = W_t int_0^t W_s^{-1} u_s ds, trapezoid in the translated frame.
    """
    w = frame.damped_inverse(density)
    integral = cumulative_trapezoid(w, dx=path.grid.dt, axis=0, initial=0.0)
    return PathVectorField(values=frame.damped_apply(integral), density=density)


def covariant_time_derivative(path: SolutionPath, frame: TransportFrame, v: PathVectorField) -> np.ndarray:
    """
    Damped covariant derivative u_k = W_k d/dt(W^{-1} v)_k.

    Second-order central differences inside, second-order one-sided at the ends.
    """
    if path.grid.steps < MIN_STEPS_FOR_DERIVATIVE:
        raise GridTooCoarse(f"Need at least {MIN_STEPS_FOR_DERIVATIVE} steps, grid has {path.grid.steps}")
    w = frame.damped_inverse(v.values)
    dw = np.gradient(w, path.grid.dt, axis=0, edge_order=2)
    return frame.damped_apply(dw)
