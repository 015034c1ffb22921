"""Unit sphere S^n with the gradient SDE system"""
import logging
from typing import Optional

import numpy as np

from geometry.models import ManifoldModel

logger = logging.getLogger(__name__)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1, keepdims=True)


class SphereGradient(ManifoldModel):
    """
    S^n in R^(n+1) driven by X(x)e = P(x)e, the orthogonal projection onto T_xM.

    X is extended off the sphere by P(y) = I - y y^T/|y|^2 so that the Heun
    predictor and its linearization are defined. Y(x) is the inclusion, the LW
    connection is Levi-Civita and Ric = (n-1) id.
    """

    name = "sphere"
    scheme = "heun"
    torsion_free = True
    metric_scale = 1.0

    def __init__(self, n: int = 2, base_point: Optional[np.ndarray] = None):
        if n < 1:
            raise ValueError(f"Sphere dimension must be positive, got {n}")
        self.n = n
        self.m = n + 1
        self.d = n + 1
        super().__init__(base_point)

    def default_base_point(self) -> np.ndarray:
        x0 = np.zeros(self.d)
        x0[-1] = 1.0
        return x0

    def constraint_residual(self, x: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0)

    def tangent_residual(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.abs(np.sum(x * v, axis=-1))

    def retract(self, y: np.ndarray) -> np.ndarray:
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def retract_derivative(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        u = y / r
        return (w - u * _dot(u, w)) / r

    def project_tangent(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        return w - x * _dot(x, w) / _dot(x, x)

    def projector(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        outer = y[..., :, None] * y[..., None, :]
        return np.eye(self.d) - outer / np.sum(y * y, axis=-1)[..., None, None]

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        u, _, _ = np.linalg.svd(self.projector(x))
        return u[..., :, : self.n]

    def diffusion(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return e - x * _dot(x, e) / _dot(x, x)

    def diffusion_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.projector(x)

    def diffusion_derivative(self, y: np.ndarray, w: np.ndarray, e: np.ndarray) -> np.ndarray:
        """Ambient derivative dX(y)[w]e of the extended projection"""
        r2 = _dot(y, y)
        ye = _dot(y, e)
        return -(w * ye + y * _dot(w, e)) / r2 + 2.0 * _dot(y, w) * ye * y / (r2 * r2)

    def lift(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.broadcast_to(v, np.broadcast_shapes(x.shape, v.shape)).copy()

    def kernel_complement(self, x: np.ndarray) -> np.ndarray:
        return self.projector(x)

    def kernel_basis(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x / np.linalg.norm(x, axis=-1, keepdims=True))[..., None]

    def lw_derivative_of_section(self, x: np.ndarray, v: np.ndarray, e: np.ndarray) -> np.ndarray:
        return -_dot(x, e) * v

    def ricci_sharp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return (self.n - 1) * self.project_tangent(x, v)

    def random_point(self, rng: np.random.Generator, size=()) -> np.ndarray:
        size = (size,) if isinstance(size, int) else tuple(size)
        return self.retract(rng.standard_normal(size + (self.d,)))
