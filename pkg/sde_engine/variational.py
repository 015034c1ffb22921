"""Derivative of the Ito map by exact differentiation of the discrete scheme"""
import logging

import numpy as np

from pathspace.cameron_martin import CameronMartinVector
from sde_engine.errors import GridError, SingularFlow
from sde_engine.integrator import SolutionPath
from sde_engine.schemes import scheme_for
from transport.fields import PathVectorField

logger = logging.getLogger(__name__)

SINGULAR_DET = 1e-12


def _step_determinant(path: SolutionPath, scheme, k: int) -> np.ndarray:
    """det of the one-step tangent map between metric-orthonormal bases at x_k, x_{k+1}"""
    model = path.model
    x, nxt = path.points[k], path.points[k + 1]
    db = path.driver.increments[k]
    basis = model.tangent_basis(x)
    cols = np.swapaxes(basis, -1, -2)
    zero = np.zeros(cols.shape[:-1] + (model.m,))
    images = scheme.linearize(x[..., None, :], db[..., None, :], path.grid.dt, cols, zero)
    target = model.tangent_basis(nxt)
    mat = model.coordinates(target[..., None, :, :], images)
    return np.linalg.det(mat)


def bismut_derivative(path: SolutionPath, h: CameronMartinVector, check_flow: bool = True) -> PathVectorField:
    """
    T_omega I(h): the derivative of the discrete Ito map in direction h.

    Propagates v_{k+1} = J_x v_k + J_B dh_k with the exact tangent map of one
    scheme step, where dh_k is the trapezoid increment of h. v_0 = 0.

    Args:
        path: Solution path (batched)
        h: Cameron-Martin direction on the same grid
        check_flow: Raise SingularFlow when a step's tangent map is near singular

    Returns:
        PathVectorField of shape (N+1, *batch, d)
    """
    if h.grid != path.grid:
        raise GridError(f"Direction grid {h.grid} differs from path grid {path.grid}")
    model = path.model
    scheme = scheme_for(model)
    dt = path.grid.dt
    dh = h.increments()
    values = np.zeros(path.points.shape)
    for k in range(path.grid.steps):
        x = path.points[k]
        db = path.driver.increments[k]
        values[k + 1] = scheme.linearize(x, db, dt, values[k], np.broadcast_to(dh[k], db.shape))
        if check_flow:
            det = np.abs(_step_determinant(path, scheme, k))
            worst = float(np.min(det, initial=np.inf))
            if worst < SINGULAR_DET:
                raise SingularFlow(f"Step {k}: linearized flow determinant {worst:.3e}; reduce the step size")
    return PathVectorField(values=values)
