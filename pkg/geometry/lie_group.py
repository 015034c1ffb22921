"""Rotation group SO(3) with the left-invariant SDE system"""
import logging
from typing import Optional

import numpy as np

from geometry.models import ManifoldModel
from geometry.so3 import hat, vee, skew, rotation_polar

logger = logging.getLogger(__name__)


def as_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(x.shape[:-1] + (3, 3))


def as_flat(g: np.ndarray) -> np.ndarray:
    return g.reshape(g.shape[:-2] + (9,))


class RotationGroupLeftInvariant(ManifoldModel):
    """
    SO(3) as flattened 3x3 matrices with X(g)e = g hat(e).

    The metric is half the Frobenius product, which makes X(g) an isometry of R^3
    onto T_gG. X is injective, so K = 0 and there is no redundant noise. The LW
    connection is the flat left-invariant one; its adjoint connection transports
    by right translation.
    """

    name = "group"
    n = 3
    m = 3
    d = 9
    metric_scale = 0.5
    scheme = "lie"
    torsion_free = False

    def __init__(self, base_point: Optional[np.ndarray] = None):
        super().__init__(base_point)

    def default_base_point(self) -> np.ndarray:
        return np.eye(3).reshape(9)

    def constraint_residual(self, x: np.ndarray) -> np.ndarray:
        g = as_matrix(x)
        defect = np.swapaxes(g, -1, -2) @ g - np.eye(3)
        return np.max(np.abs(defect), axis=(-2, -1))

    def tangent_residual(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        a = np.swapaxes(as_matrix(x), -1, -2) @ as_matrix(v)
        return np.max(np.abs(a + np.swapaxes(a, -1, -2)), axis=(-2, -1))

    def retract(self, y: np.ndarray) -> np.ndarray:
        return as_flat(rotation_polar(as_matrix(y)))

    def project_tangent(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        g = as_matrix(x)
        return as_flat(g @ skew(np.swapaxes(g, -1, -2) @ as_matrix(w)))

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        return self.diffusion_matrix(x)

    def diffusion(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return as_flat(as_matrix(x) @ hat(e))

    def diffusion_matrix(self, x: np.ndarray) -> np.ndarray:
        g = as_matrix(x)
        cols = [as_flat(g @ hat(e)) for e in np.eye(3)]
        return np.stack(cols, axis=-1)

    def lift(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        g = as_matrix(x)
        return vee(skew(np.swapaxes(g, -1, -2) @ as_matrix(v)))

    def kernel_complement(self, x: np.ndarray) -> np.ndarray:
        shape = np.shape(x)[:-1] + (3, 3)
        return np.broadcast_to(np.eye(3), shape).copy()

    def kernel_basis(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(x)[:-1] + (3, 0))

    def lw_derivative_of_section(self, x: np.ndarray, v: np.ndarray, e: np.ndarray) -> np.ndarray:
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)))

    def ricci_sharp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)))

    def adjoint_transport_step(self, x_from: np.ndarray, x_to: np.ndarray, frame: np.ndarray) -> np.ndarray:
        """Right translation: each column V maps to V g_from^T g_to"""
        shift = np.swapaxes(as_matrix(x_from), -1, -2) @ as_matrix(x_to)
        cols = as_matrix(np.swapaxes(frame, -1, -2))
        moved = cols @ shift[..., None, :, :]
        return np.swapaxes(as_flat(moved), -1, -2)

    def random_point(self, rng: np.random.Generator, size=()) -> np.ndarray:
        size = (size,) if isinstance(size, int) else tuple(size)
        return self.retract(as_flat(rng.standard_normal(size + (3, 3))))
