"""Exponential martingales and their conditioning on the solution path"""
import logging
from typing import Optional, Tuple, Union

import numpy as np

from harness.schemas import EstimateWithCI
from harness.stats import Z_MAX, estimate
from pathspace.cameron_martin import CameronMartinVector
from sde_engine.grid import BrownianDriver
from sde_engine.integrator import SolutionPath
from sde_engine.noise_split import conditional_resamples, decompose_noise
from wiener.integrals import wiener_integral

logger = logging.getLogger(__name__)

EXPONENT_CLAMP = 700.0


def _clamped_exp(exponent: np.ndarray, label: str) -> Tuple[np.ndarray, np.ndarray]:
    flag = exponent > EXPONENT_CLAMP
    if np.any(flag):
        logger.warning(f"{label}: {int(np.sum(flag))} exponents above {EXPONENT_CLAMP:g} clamped")
    return np.exp(np.minimum(exponent, EXPONENT_CLAMP)), flag


def exp_martingale(
    driver: BrownianDriver,
    a: CameronMartinVector,
    return_flag: bool = False
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    epsilon(a) = exp(int <a', dB> - |a|^2 / 2).

    The compensator is the energy of the step slopes, so E[epsilon] = 1 and
    E[epsilon^2] = exp(energy) hold exactly on the grid.

    Returns:
        Values per path, plus the clamp mask when return_flag is set
    """
    exponent = wiener_integral(driver, a) - 0.5 * a.step_energy()
    values, flag = _clamped_exp(exponent, "exp_martingale")
    return (values, flag) if return_flag else values


def exp_martingale_moments(
    driver: BrownianDriver,
    a: CameronMartinVector,
    z_max: float = Z_MAX,
    seed: Optional[int] = None
) -> Tuple[EstimateWithCI, EstimateWithCI]:
    """E[epsilon(a)] against 1 and E[epsilon(a)^2] against exp(|a|^2)"""
    values = exp_martingale(driver, a)
    energy = float(a.step_energy())
    first = estimate(values, 1.0, z_max=z_max, seed=seed)
    second = estimate(values ** 2, float(np.exp(energy)), z_max=z_max, seed=seed)
    return first, second


def conditional_exp_martingale(path: SolutionPath, a: CameronMartinVector) -> np.ndarray:
    """
    Conditional expectation of epsilon(a) given the solution path:
    exp(int <X a', X dB> - 1/2 int |X a'|^2 ds) with left-point sums.
    """
    model = path.model
    steps = path.grid.steps
    x = path.points[:steps]
    slopes = a.along(path.batch_shape, steps=True)
    pushed = model.diffusion(x, slopes)
    noise = model.diffusion(x, path.driver.increments)
    exponent = np.sum(model.inner(pushed, noise), axis=0) - 0.5 * path.grid.dt * np.sum(model.inner(pushed, pushed), axis=0)
    values, _ = _clamped_exp(exponent, "conditional_exp_martingale")
    return values


def conditional_exp_martingale_check(
    path: SolutionPath,
    a: CameronMartinVector,
    resamples: int,
    seed: int,
    base_index: int = 0,
    z_max: float = Z_MAX,
    tol: Optional[float] = None
) -> EstimateWithCI:
    """
    Monte Carlo mean of epsilon(a) over redundant-noise resamples of one base
    path, z-tested against the analytic conditional expectation on that path.
    """
    target = float(conditional_exp_martingale(path, a))
    split = decompose_noise(path)
    driver, _, _ = conditional_resamples(path, split, resamples, seed, base_index, tol=tol)
    return estimate(exp_martingale(driver, a), target, z_max=z_max, seed=seed)
