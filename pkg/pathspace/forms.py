"""H-one-forms along paths and their pull-back to the driver space"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from harness.schemas import EstimateWithCI
from harness.stats import Z_MAX, estimate
from pathspace.cameron_martin import CameronMartinVector
from pathspace.cylindrical import CylindricalFunction
from pathspace.errors import NonFiniteDensity
from pathspace.tangents import BismutTangent, xbar
from sde_engine.integrator import SolutionPath
from sde_engine.noise_split import NoiseSplit, conditional_resamples, decompose_noise
from sde_engine.variational import bismut_derivative
from transport.frames import TransportFrame, build_transport

logger = logging.getLogger(__name__)

# (t, x) -> ambient differential at x, the L^2 density of a geometric form
CovectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class HOneForm:
    """
    One-form on H_sigma given by the density a_k = D(phi#)/ds of its dual field,
    so that phi(v) = int <a_s, Dv/ds> ds.
    """

    path: SolutionPath
    sharp_density: np.ndarray
    adapted: bool = False
    label: str = ""

    def evaluate(self, v: BismutTangent) -> np.ndarray:
        return trapezoid(self.path.model.inner(self.sharp_density, v.density), dx=self.path.grid.dt, axis=0)

    def norm_sq(self) -> np.ndarray:
        return trapezoid(self.path.model.inner(self.sharp_density, self.sharp_density), dx=self.path.grid.dt, axis=0)

    @classmethod
    def zero(cls, path: SolutionPath) -> "HOneForm":
        return cls(path=path, sharp_density=np.zeros(path.points.shape), adapted=True, label="zero")

    @classmethod
    def from_l2_density(cls, path: SolutionPath, frame: TransportFrame, covector: CovectorField) -> "HOneForm":
        """
        Form phi(v) = int <alpha_t, v_t> dt with alpha_t the gradient of covector(t, x_t).

        a_s = (W_s^{-1})^* int_s^T W_t^* alpha_t dt, accumulated backwards by the
        trapezoid rule in the translated frame.
        """
        alpha = l2_density(path, covector)
        pulled = frame.damped_adjoint(alpha)
        running = cumulative_trapezoid(pulled, dx=path.grid.dt, axis=0, initial=0.0)
        tail = running[-1] - running
        return cls(path=path, sharp_density=frame.damped_inverse_adjoint(tail), label="l2")

    @classmethod
    def from_cylindrical(cls, path: SolutionPath, frame: TransportFrame, f: CylindricalFunction) -> "HOneForm":
        """Sharp of d_H f: a_s = (W_s^{-1})^* sum_{t_i >= s} W_{t_i}^* grad_i f"""
        grads = f.gradients(path)
        n = path.model.n
        tail = np.zeros((path.grid.steps + 1,) + path.batch_shape + (n,))
        for i, grad in zip(f.indices, grads):
            # W_{t_i}^* grad_i, added to every node s <= t_i
            tail[: i + 1] += np.einsum(
                "...ji,...j->...i",
                frame.damping[i],
                path.model.coordinates(frame.adjoint[i], grad)
            )
        return cls(path=path, sharp_density=frame.damped_inverse_adjoint(tail), label=f"d_H {f.label}")


def l2_density(path: SolutionPath, covector: CovectorField) -> np.ndarray:
    """alpha_k = grad of covector(t_k, x_k), shape (N+1, *batch, d)"""
    times = path.grid.times.reshape((-1,) + (1,) * (path.points.ndim - 1))
    return path.model.gradient(path.points, covector(times, path.points))


def direct_l2_value(path: SolutionPath, covector: CovectorField, values: np.ndarray) -> np.ndarray:
    """int <alpha_t, v_t> dt evaluated directly on field values"""
    alpha = l2_density(path, covector)
    return trapezoid(path.model.inner(alpha, values), dx=path.grid.dt, axis=0)


def pullback_one_form(
    path: SolutionPath,
    split: NoiseSplit,
    frame: TransportFrame,
    form: HOneForm,
    h: CameronMartinVector,
    tangent: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    I*(phi)(h) = sum_k <a_k, nabla_{v_k} X(Q_k dbeta_k)> + int <a_s, X(x_s) h'_s> ds.

    The martingale part is a left-point Ito sum against the redundant noise; the
    drift part uses the trapezoid rule. v = T I(h) is computed when not given.

    Returns:
        One value per path
    """
    a = form.sharp_density
    if not np.all(np.isfinite(a)):
        raise NonFiniteDensity(f"Form {form.label} has non-finite density entries")
    model = path.model
    if tangent is None:
        tangent = bismut_derivative(path, h, check_flow=False).values
    steps = path.grid.steps
    redundant = split.transported_redundant()
    moved = model.lw_derivative_of_section(path.points[:steps], tangent[:steps], redundant)
    martingale = np.sum(model.inner(a[:steps], moved), axis=0)
    slopes = h.along(path.batch_shape)
    drift = trapezoid(model.inner(a, model.diffusion(path.points, slopes)), dx=path.grid.dt, axis=0)
    return martingale + drift


def conditional_pullback_check(
    path: SolutionPath,
    covector: CovectorField,
    h: CameronMartinVector,
    resamples: int,
    seed: int,
    base_index: int = 0,
    z_max: float = Z_MAX,
    tol: Optional[float] = None
) -> EstimateWithCI:
    """
    E{I*(phi)(h) | x} against phi(xbar h) on one base path.

    The redundant noise is resampled `resamples` times, each resampled path gets
    its own frame, split and form density, and the pull-back is averaged.
    """
    frame = build_transport(path)
    target = float(HOneForm.from_l2_density(path, frame, covector).evaluate(xbar(path, frame, h)))
    split = decompose_noise(path)
    _, resampled, _ = conditional_resamples(path, split, resamples, seed, base_index, tol=tol)
    frame_r = build_transport(resampled)
    split_r = decompose_noise(resampled)
    form_r = HOneForm.from_l2_density(resampled, frame_r, covector)
    values = pullback_one_form(resampled, split_r, frame_r, form_r, h)
    return estimate(values, target, z_max=z_max, seed=seed)


def conditional_moment_ratio(
    path: SolutionPath,
    h: CameronMartinVector,
    resamples: int,
    seed: int,
    base_index: int = 0,
    tol: Optional[float] = None
) -> float:
    """E{sup_t |W_t^{-1} T I_t(h)|^2 | x} / |h|_H^2 estimated over redundant-noise resamples"""
    split = decompose_noise(path)
    _, resampled, _ = conditional_resamples(path, split, resamples, seed, base_index, tol=tol)
    frame_r = build_transport(resampled)
    tangent = bismut_derivative(resampled, h, check_flow=False).values
    coords = frame_r.damped_inverse(tangent)
    sup_sq = np.max(np.sum(coords ** 2, axis=-1), axis=0)
    return float(np.mean(sup_sq) / h.norm_sq())
