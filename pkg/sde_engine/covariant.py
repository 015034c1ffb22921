"""Covariant Ito route to the derivative of the Ito map"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import expm

from pathspace.cameron_martin import CameronMartinVector
from sde_engine.errors import GridError
from sde_engine.integrator import SolutionPath
from sde_engine.noise_split import NoiseSplit
from transport.fields import PathVectorField
from transport.frames import TransportFrame, build_transport

logger = logging.getLogger(__name__)

SCHEMES = ("stratonovich", "euler")


def _pull_back_columns(frame: TransportFrame, images: np.ndarray) -> np.ndarray:
    """
    Matrix of W^{-1} applied to images of the damped basis.

    images has shape (..., n, d) with row i the image of W e_i; returns (..., n, n)
    whose column i is W^{-1}(image i).
    """
    model = frame.model
    coords = model.coordinates(frame.adjoint[..., None, :, :], images)
    return np.linalg.solve(frame.damping, np.swapaxes(coords, -1, -2))


def connection_operator(path: SolutionPath, frame: TransportFrame, noise: np.ndarray, nodes: slice) -> np.ndarray:
    """W^{-1} nabla_{W .} X(noise) at the given nodes as (..., n, n)"""
    model = path.model
    x = path.points[nodes][..., None, :]
    cols = np.swapaxes(frame.damped_columns()[nodes], -1, -2)
    images = model.lw_derivative_of_section(x, cols, noise[..., None, :])
    return _pull_back_columns(_restrict(frame, nodes), images)


def ricci_operator(path: SolutionPath, frame: TransportFrame) -> np.ndarray:
    """W^{-1} Ric W at every node as (N+1, *batch, n, n)"""
    model = path.model
    cols = np.swapaxes(frame.damped_columns(), -1, -2)
    images = model.ricci_sharp(path.points[..., None, :], cols)
    return _pull_back_columns(frame, images)


def _restrict(frame: TransportFrame, nodes: slice) -> TransportFrame:
    return TransportFrame(
        model=frame.model,
        base=frame.base,
        parallel=frame.parallel[nodes],
        adjoint=frame.adjoint[nodes],
        damping=frame.damping[nodes]
    )


def covariant_derivative_path(
    path: SolutionPath,
    split: NoiseSplit,
    h: CameronMartinVector,
    frame: Optional[TransportFrame] = None,
    scheme: str = "stratonovich"
) -> PathVectorField:
    """
    Solve the covariant equation for v = T I(h) in u = W^{-1} v.

    stratonovich: u_{k+1} = exp(G_k)(u_k + f_k dt/2) + f_{k+1} dt/2 with
        G_k = (A_k + A'_{k+1})/2 + (R_k + R_{k+1}) dt/4, where A_k uses the
        redundant noise at x_k and A'_{k+1} uses K(x_{k+1}) dB_k.
    euler: u_{k+1} = u_k + A_k u_k + (f_k + f_{k+1}) dt/2.

    Here A = W^{-1} nabla_{W.} X(.), R = W^{-1} Ric W and f = W^{-1} X h'.

    Args:
        path: Solution path
        split: Noise split of the same path
        h: Direction
        frame: Transport frame (built when omitted)
        scheme: "stratonovich" or "euler"

    Returns:
        PathVectorField with v_0 = 0
    """
    if scheme not in SCHEMES:
        raise ValueError(f"Unknown covariant scheme: {scheme}")
    if h.grid != path.grid:
        raise GridError(f"Direction grid {h.grid} differs from path grid {path.grid}")
    frame = build_transport(path) if frame is None else frame
    model = path.model
    dt = path.grid.dt
    steps = path.grid.steps

    slopes = h.along(path.batch_shape)
    forcing = frame.damped_inverse(model.diffusion(path.points, slopes))
    redundant_here = split.transported_redundant()
    left = connection_operator(path, frame, redundant_here, slice(0, steps))

    u = np.zeros(forcing.shape)
    if scheme == "euler":
        for k in range(steps):
            u[k + 1] = u[k] + np.einsum("...ij,...j->...i", left[k], u[k]) + 0.5 * dt * (forcing[k] + forcing[k + 1])
    else:
        increments = split.recombine()
        k_next = model.kernel_projection(path.points[1:])
        redundant_next = np.einsum("...ij,...j->...i", k_next, increments)
        right = connection_operator(path, frame, redundant_next, slice(1, steps + 1))
        ricci = ricci_operator(path, frame)
        gen = 0.5 * (left + right) + 0.25 * dt * (ricci[:-1] + ricci[1:])
        flow = expm(gen)
        for k in range(steps):
            u[k + 1] = np.einsum("...ij,...j->...i", flow[k], u[k] + 0.5 * dt * forcing[k]) + 0.5 * dt * forcing[k + 1]
    return PathVectorField(values=frame.damped_apply(u))
