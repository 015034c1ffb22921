"""Parallel and damped parallel translation along sample paths"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from geometry.models import ManifoldModel
from sde_engine.integrator import SolutionPath

logger = logging.getLogger(__name__)

ISOMETRY_TOL = 1e-8


def metric_polar(model: ManifoldModel, frame: np.ndarray) -> np.ndarray:
    """Nearest metric-orthonormal frame (polar factor) to a (..., d, k) frame"""
    root = np.sqrt(model.metric_scale)
    u, _, vt = np.linalg.svd(root * frame, full_matrices=False)
    return (u @ vt) / root


@dataclass
class TransportFrame:
    """
    Transport data along a (batched) solution path.

    Vectors at x_0 are handled in coordinates of the orthonormal basis
    `base`. parallel[k] and adjoint[k] are the images of that basis under
    LW parallel translation and adjoint-connection translation; damping[k] is
    the translated damping matrix, so that W_k = adjoint[k] damping[k] base^*.
    """

    model: ManifoldModel
    base: np.ndarray
    parallel: np.ndarray
    adjoint: np.ndarray
    damping: Optional[np.ndarray] = None

    def _coords(self, frames: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.model.coordinates(frames, v)

    def parallel_apply(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("...dn,...n->...d", self.parallel, c)

    def parallel_inverse(self, v: np.ndarray) -> np.ndarray:
        return self._coords(self.parallel, v)

    def damped_apply(self, c: np.ndarray) -> np.ndarray:
        """W_k applied to coordinates c_k, node-wise"""
        return np.einsum("...dn,...n->...d", self.adjoint, np.einsum("...ij,...j->...i", self.damping, c))

    def damped_inverse(self, v: np.ndarray) -> np.ndarray:
        """W_k^{-1} v_k as coordinates"""
        return np.linalg.solve(self.damping, self._coords(self.adjoint, v)[..., None])[..., 0]

    def damped_adjoint(self, v: np.ndarray) -> np.ndarray:
        """W_k^* v_k as coordinates"""
        return np.einsum("...ji,...j->...i", self.damping, self._coords(self.adjoint, v))

    def damped_inverse_adjoint(self, c: np.ndarray) -> np.ndarray:
        """(W_k^{-1})^* c_k as ambient vectors at x_k"""
        lam_t = np.swapaxes(self.damping, -1, -2)
        return np.einsum("...dn,...n->...d", self.adjoint, np.linalg.solve(lam_t, c[..., None])[..., 0])

    def damped_columns(self) -> np.ndarray:
        """W_k applied to the base basis, shape (N+1, *batch, d, n)"""
        return self.adjoint @ self.damping

    def base_vector(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("dn,...n->...d", self.base, c)

    def base_coords(self, v: np.ndarray) -> np.ndarray:
        return self._coords(self.base, v)

    def isometry_defect(self) -> float:
        gram = self.model.metric_scale * np.swapaxes(self.parallel, -1, -2) @ self.parallel
        return float(np.max(np.abs(gram - np.eye(self.model.n)), initial=0.0))


def parallel_translate(path: SolutionPath) -> TransportFrame:
    """
    LW parallel translation (and its adjoint-connection twin) along the path.

    Each step moves the frame with X(x_{k+1})Y(x_k) and re-orthonormalizes by the
    metric polar factor.
    """
    model = path.model
    steps = path.grid.steps
    # every path of the batch starts at the same point
    base = model.tangent_basis(path.x0.reshape(-1, model.d)[0])
    shape = (steps + 1,) + path.batch_shape + (model.d, model.n)
    parallel = np.empty(shape)
    adjoint = np.empty(shape)
    parallel[0] = base
    adjoint[0] = base
    points = path.points
    for k in range(steps):
        parallel[k + 1] = metric_polar(model, model.transport_step(points[k], points[k + 1], parallel[k]))
        adjoint[k + 1] = metric_polar(model, model.adjoint_transport_step(points[k], points[k + 1], adjoint[k]))
    frame = TransportFrame(model=model, base=base, parallel=parallel, adjoint=adjoint)
    defect = frame.isometry_defect()
    if defect > ISOMETRY_TOL:
        logger.warning(f"Parallel frame isometry defect {defect:.3e} exceeds {ISOMETRY_TOL:.1e}")
    return frame


def _generator(model: ManifoldModel, x: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Translated damping generator E'^*(-Ric/2 + nabla A)E' as (..., n, n)"""
    cols = np.swapaxes(frame, -1, -2)
    xb = x[..., None, :]
    field = -0.5 * model.ricci_sharp(xb, cols) + model.drift_derivative(xb, cols)
    return np.swapaxes(model.coordinates(frame[..., None, :, :], field), -1, -2)


def damped_translate(path: SolutionPath, frame: TransportFrame) -> TransportFrame:
    """
    Damped parallel translation W_k = adjoint[k] damping[k].

    The damping matrix solves d/dt Lambda = G(t) Lambda in the translated frame,
    G linear in t on each step, with one RK4 step per grid step.
    """
    model = path.model
    dt = path.grid.dt
    gens = _generator(model, path.points, frame.adjoint)
    n = model.n
    lam = np.empty(gens.shape)
    lam[0] = np.broadcast_to(np.eye(n), gens.shape[1:])
    for k in range(path.grid.steps):
        g0, g1 = gens[k], gens[k + 1]
        gm = 0.5 * (g0 + g1)
        cur = lam[k]
        k1 = g0 @ cur
        k2 = gm @ (cur + 0.5 * dt * k1)
        k3 = gm @ (cur + 0.5 * dt * k2)
        k4 = g1 @ (cur + dt * k3)
        lam[k + 1] = cur + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return replace(frame, damping=lam)


def build_transport(path: SolutionPath) -> TransportFrame:
    return damped_translate(path, parallel_translate(path))
