"""Bismut tangent vectors and the maps xbar, ybar between H and H_sigma"""
import logging
from dataclasses import dataclass

import numpy as np

from pathspace.cameron_martin import CameronMartinVector
from sde_engine.integrator import SolutionPath
from transport.fields import PathVectorField, l2_norm_sq, script_W
from transport.frames import TransportFrame

logger = logging.getLogger(__name__)


@dataclass
class BismutTangent:
    """
    Element of H_sigma: a field along the path with v_0 = 0 and L^2 damped
    covariant derivative. density holds u_k = Dv/dt at every node.
    """

    path: SolutionPath
    density: np.ndarray
    values: np.ndarray

    def norm_sq(self) -> np.ndarray:
        return l2_norm_sq(self.path, self.density)

    def as_field(self) -> PathVectorField:
        return PathVectorField(values=self.values, density=self.density)

    @classmethod
    def from_density(cls, path: SolutionPath, frame: TransportFrame, density: np.ndarray) -> "BismutTangent":
        field = script_W(path, frame, density)
        return cls(path=path, density=density, values=field.values)


def xbar(path: SolutionPath, frame: TransportFrame, h: CameronMartinVector) -> BismutTangent:
    """Projection of T I(h): xbar(h)_t = W_t int_0^t W_s^{-1} X(x_s) h'_s ds"""
    model = path.model
    slopes = h.along(path.batch_shape)
    density = model.diffusion(path.points, slopes)
    return BismutTangent.from_density(path, frame, density)


def ybar(path: SolutionPath, frame: TransportFrame, v: BismutTangent) -> CameronMartinVector:
    """Isometric right inverse of xbar: h'_s = Y(x_s) (Dv/ds)_s"""
    return CameronMartinVector(path.grid, path.model.lift(path.points, v.density))


def kernel_complement_h(path: SolutionPath, h: CameronMartinVector) -> CameronMartinVector:
    """(K_perp h)' = K_perp(x_s) h'_s along the path"""
    k_perp = path.model.kernel_complement(path.points)
    slopes = h.along(path.batch_shape)
    return CameronMartinVector(path.grid, np.einsum("...ij,...j->...i", k_perp, slopes))
