"""One-step schemes and their exact linearizations"""
import logging
from typing import Tuple

import numpy as np

from geometry.lie_group import as_flat, as_matrix
from geometry.models import ManifoldModel
from geometry.so3 import exp_so3, hat, right_jacobian_so3

logger = logging.getLogger(__name__)


class HeunProjectionScheme:
    """
    Stratonovich-Heun step followed by projection onto the manifold.

    x~ = x + X(x)dB + A(x)dt
    y  = x + (X(x) + X(x~))dB/2 + (A(x) + A(x~))dt/2
    x' = retract(y)
    """

    def __init__(self, model: ManifoldModel):
        self.model = model

    def step(self, x: np.ndarray, db: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Returns the next point and the unprojected corrector y"""
        model = self.model
        a = model.drift(x)
        kick = model.diffusion(x, db)
        predictor = x + kick + a * dt
        y = x + 0.5 * (kick + model.diffusion(predictor, db)) + 0.5 * (a + model.drift(predictor)) * dt
        return model.retract(y), y

    def linearize(self, x: np.ndarray, db: np.ndarray, dt: float, dx: np.ndarray, ddb: np.ndarray) -> np.ndarray:
        """Tangent map of step at (x, db) applied to (dx, ddb)"""
        model = self.model
        a = model.drift(x)
        kick = model.diffusion(x, db)
        predictor = x + kick + a * dt
        y = x + 0.5 * (kick + model.diffusion(predictor, db)) + 0.5 * (a + model.drift(predictor)) * dt

        d_kick = model.diffusion_derivative(x, dx, db) + model.diffusion(x, ddb)
        d_a = model.drift_jacobian(x, dx)
        d_predictor = dx + d_kick + d_a * dt
        d_kick_predictor = model.diffusion_derivative(predictor, d_predictor, db) + model.diffusion(predictor, ddb)
        dy = dx + 0.5 * (d_kick + d_kick_predictor) + 0.5 * (d_a + model.drift_jacobian(predictor, d_predictor)) * dt
        return model.retract_derivative(y, dy)


class LieExponentialScheme:
    """Exponential step x' = x exp(hat(dB)) for left-invariant systems on SO(3)"""

    def __init__(self, model: ManifoldModel):
        self.model = model

    def step(self, x: np.ndarray, db: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        nxt = as_flat(as_matrix(x) @ exp_so3(db))
        return nxt, nxt

    def linearize(self, x: np.ndarray, db: np.ndarray, dt: float, dx: np.ndarray, ddb: np.ndarray) -> np.ndarray:
        g = as_matrix(x)
        e = exp_so3(db)
        jr = right_jacobian_so3(db)
        twist = hat(np.einsum("...ij,...j->...i", jr, ddb))
        return as_flat(as_matrix(dx) @ e + g @ e @ twist)


def scheme_for(model: ManifoldModel):
    if model.scheme == "heun":
        return HeunProjectionScheme(model)
    if model.scheme == "lie":
        return LieExponentialScheme(model)
    raise ValueError(f"No scheme registered for {model.scheme}")
