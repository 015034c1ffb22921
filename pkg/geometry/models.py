"""Manifold model interface and registry"""
import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from geometry.errors import ConstraintViolation, NotTangent, StepUnderflow

logger = logging.getLogger(__name__)

POINT_TOL = 1e-10
TANGENT_TOL = 1e-10
FD_STEP = 1e-5
MIN_FD_STEP = 1e-12

Section = Callable[[np.ndarray], np.ndarray]


def _columns_first(frame: np.ndarray) -> np.ndarray:
    """(..., d, k) -> (..., k, d)"""
    return np.swapaxes(frame, -1, -2)


class ManifoldModel(ABC):
    """
    A compact manifold M embedded in R^d carrying the SDE dx = X(x) o dB + A(x) dt.

    Points and tangent vectors are ambient arrays of shape (..., d), noise vectors
    have shape (..., m). Evaluators broadcast over all leading axes. Frames are
    stored column-wise as (..., d, k).
    """

    name: str = ""
    n: int = 0
    m: int = 0
    d: int = 0
    # Riemannian metric is metric_scale times the ambient Euclidean one
    metric_scale: float = 1.0
    scheme: str = "heun"
    torsion_free: bool = True

    def __init__(self, base_point: Optional[np.ndarray] = None):
        self._base_point = None if base_point is None else np.asarray(base_point, dtype=float)

    @property
    def base_point(self) -> np.ndarray:
        if self._base_point is None:
            return self.default_base_point()
        return self._base_point

    @abstractmethod
    def default_base_point(self) -> np.ndarray:
        ...

    # --- constraint and tangency ---

    @abstractmethod
    def constraint_residual(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def tangent_residual(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def retract(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def project_tangent(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Euclidean-orthogonal projection of an ambient vector onto T_xM"""

    @abstractmethod
    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """Metric-orthonormal basis of T_xM as columns, shape (..., d, n)"""

    def check_point(self, x: np.ndarray, tol: float = POINT_TOL):
        residual = float(np.max(self.constraint_residual(x)))
        if residual > tol:
            raise ConstraintViolation(f"{self.name}: constraint residual {residual:.3e} exceeds {tol:.1e}")

    def check_tangent(self, x: np.ndarray, v: np.ndarray, tol: float = TANGENT_TOL):
        scale = max(1.0, float(np.max(np.abs(v))))
        residual = float(np.max(self.tangent_residual(x, v)))
        if residual > tol * scale:
            raise NotTangent(f"{self.name}: tangency residual {residual:.3e} exceeds {tol:.1e}")

    # --- metric ---

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.metric_scale * np.sum(u * v, axis=-1)

    def norm(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def gradient(self, x: np.ndarray, covector: np.ndarray) -> np.ndarray:
        """Metric gradient on T_xM of a function with ambient differential `covector`"""
        return self.project_tangent(x, covector) / self.metric_scale

    def coordinates(self, frame: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Components of v in a metric-orthonormal frame (..., d, k) -> (..., k)"""
        return self.metric_scale * np.einsum("...dk,...d->...k", frame, v)

    # --- the SDE system ---

    @abstractmethod
    def diffusion(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        """X(x)e without validation"""

    @abstractmethod
    def diffusion_matrix(self, x: np.ndarray) -> np.ndarray:
        """X(x) as (..., d, m)"""

    @abstractmethod
    def lift(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Y(x)v without validation"""

    def drift(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)

    def drift_jacobian(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Ambient derivative dA(x)[w]"""
        return np.zeros(np.broadcast_shapes(x.shape, w.shape))

    def drift_derivative(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Covariant derivative of the drift along v"""
        return np.zeros(np.broadcast_shapes(x.shape, v.shape))

    def kernel_complement(self, x: np.ndarray) -> np.ndarray:
        """K_perp(x) = Y(x)X(x) as (..., m, m)"""
        cols = self.diffusion_matrix(x)
        lifted = self.lift(x[..., None, :], _columns_first(cols))
        return _columns_first(lifted)

    def kernel_projection(self, x: np.ndarray) -> np.ndarray:
        return np.eye(self.m) - self.kernel_complement(x)

    @abstractmethod
    def kernel_basis(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal basis of ker X(x) as columns, shape (..., m, r)"""

    @abstractmethod
    def lw_derivative_of_section(self, x: np.ndarray, v: np.ndarray, e: np.ndarray) -> np.ndarray:
        """Closed form of the LW derivative of X^e along v"""

    @abstractmethod
    def ricci_sharp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        ...

    def random_point(self, rng: np.random.Generator, size=()) -> np.ndarray:
        raise NotImplementedError

    def random_tangent(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        w = rng.standard_normal(x.shape)
        return self.project_tangent(x, w)

    # --- transport steps ---

    def transport_step(self, x_from: np.ndarray, x_to: np.ndarray, frame: np.ndarray) -> np.ndarray:
        """One step of LW parallel transport before re-orthonormalization: X(x_to)Y(x_from)"""
        cols = _columns_first(frame)
        moved = self.diffusion(x_to[..., None, :], self.lift(x_from[..., None, :], cols))
        return _columns_first(moved)

    def adjoint_transport_step(self, x_from: np.ndarray, x_to: np.ndarray, frame: np.ndarray) -> np.ndarray:
        """Transport step for the adjoint connection; equals the LW step when torsion free"""
        return self.transport_step(x_from, x_to, frame)

    # --- public evaluators ---

    def diffusion_map(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        """X(x)e, validating that x lies on the manifold"""
        self.check_point(x)
        return self.diffusion(x, np.asarray(e, dtype=float))

    def right_inverse(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Y(x)v for v tangent at x"""
        self.check_point(x)
        v = np.asarray(v, dtype=float)
        self.check_tangent(x, v)
        return self.lift(x, v)

    def lw_covariant_derivative(
        self,
        x: np.ndarray,
        v: np.ndarray,
        section: Section,
        step: float = FD_STEP
    ) -> np.ndarray:
        """
        LW covariant derivative X(x) d(Y(U(.)))(v) by central differences.

        Args:
            x: Base point(s)
            v: Direction(s) tangent at x
            section: Callable mapping points to vectors of E
            step: Ambient length of the finite-difference displacement

        Returns:
            The derivative at x, tangent at x
        """
        if step < MIN_FD_STEP:
            raise StepUnderflow(f"Finite-difference step {step:.1e} below {MIN_FD_STEP:.1e}")
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        speed = np.linalg.norm(v, axis=-1, keepdims=True)
        moving = speed > 0
        s = step / np.where(moving, speed, 1.0)
        forward = self.retract(x + s * v)
        backward = self.retract(x - s * v)
        if np.any(np.all(forward == backward, axis=-1, keepdims=True) & moving):
            raise StepUnderflow(f"Finite-difference step {step:.1e} does not move the base point")
        lifted = (self.lift(forward, section(forward)) - self.lift(backward, section(backward))) / (2 * s)
        out = self.diffusion(x, lifted)
        return np.where(moving, out, 0.0)


def build_model(name: str, n: int = 2) -> ManifoldModel:
    """Instantiate a built-in model by selector name"""
    from geometry.sphere import SphereGradient
    from geometry.lie_group import RotationGroupLeftInvariant

    if name == "sphere":
        return SphereGradient(n=n)
    if name == "group":
        return RotationGroupLeftInvariant()
    raise ValueError(f"Unknown model: {name}")
