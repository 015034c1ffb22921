"""Finite-difference oracles for the analytic geometry"""
import logging
from typing import Callable

import numpy as np
from scipy.linalg import expm

from geometry.models import FD_STEP, ManifoldModel
from geometry.lie_group import as_flat, as_matrix
from geometry.so3 import hat

logger = logging.getLogger(__name__)

# Outer step for nested differences; the inner one stays at FD_STEP
CURVATURE_STEP = 1e-4


def central_difference(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, w: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """(fn(x + s w) - fn(x - s w)) / 2s in the ambient space"""
    return (fn(x + step * w) - fn(x - step * w)) / (2 * step)


def along_curve(model: ManifoldModel, fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, v: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Derivative of fn along the retracted curve s -> retract(x + s v)"""
    return (fn(model.retract(x + step * v)) - fn(model.retract(x - step * v))) / (2 * step)


def fd_left_translation_pushforward(g: np.ndarray, e: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """d/ds g exp(s hat(e)) at s=0, using scipy's matrix exponential"""
    gm = as_matrix(g)
    plus = gm @ expm(step * hat(e))
    minus = gm @ expm(-step * hat(e))
    return as_flat((plus - minus) / (2 * step))


def section_of(model: ManifoldModel, x: np.ndarray, v: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """The section y -> X(y)Y(x)v, LW-parallel at x"""
    e = model.lift(x, v)
    return lambda y: model.diffusion(y, e)


def curvature_tensor(model: ManifoldModel, x: np.ndarray, u: np.ndarray, v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    R(u, v)z assembled from nested finite differences of the LW derivative.

    Uses the sections U, V, Z through u, v, z that are parallel at x, so the
    bracket term is evaluated with the ambient difference dV(U) - dU(V).
    """
    U = section_of(model, x, u)
    V = section_of(model, x, v)
    Z = section_of(model, x, z)

    def nabla(section_a, section_b):
        return lambda y: model.lw_covariant_derivative(y, section_a(y), section_b)

    first = model.lw_covariant_derivative(x, u, nabla(V, Z), step=CURVATURE_STEP)
    second = model.lw_covariant_derivative(x, v, nabla(U, Z), step=CURVATURE_STEP)
    bracket = along_curve(model, V, x, u) - along_curve(model, U, x, v)
    bracket = model.project_tangent(x, bracket)
    third = model.lw_covariant_derivative(x, bracket, Z)
    return first - second - third


def ricci_oracle(model: ManifoldModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Ric#(v) = sum_i R(v, e_i)e_i over a metric-orthonormal basis"""
    basis = model.tangent_basis(x)
    total = np.zeros_like(v)
    for i in range(model.n):
        e = basis[..., :, i]
        total = total + curvature_tensor(model, x, v, e, e)
    return total


def fd_diffusion_derivative(model: ManifoldModel, y: np.ndarray, w: np.ndarray, e: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    return central_difference(lambda p: model.diffusion(p, e), y, w, step)


def fd_lw_section_derivative(model: ManifoldModel, x: np.ndarray, v: np.ndarray, e: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Finite-difference LW derivative of the section X^e"""
    return model.lw_covariant_derivative(x, v, lambda y: model.diffusion(y, e), step=step)


def metric_compatibility_defect(model: ManifoldModel, x: np.ndarray, v: np.ndarray, e: np.ndarray, f: np.ndarray) -> np.ndarray:
    """d<U,V>(v) - <nabla_v U, V> - <U, nabla_v V> for U = X^e, V = X^f"""
    U = lambda y: model.diffusion(y, e)
    V = lambda y: model.diffusion(y, f)
    lhs = along_curve(model, lambda y: model.inner(U(y), V(y))[..., None], x, v)[..., 0]
    rhs = model.inner(model.lw_covariant_derivative(x, v, U), V(x)) + model.inner(U(x), model.lw_covariant_derivative(x, v, V))
    return lhs - rhs
