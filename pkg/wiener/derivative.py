"""Wiener functionals and their Malliavin derivative by driver perturbation"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from pathspace.cameron_martin import CameronMartinVector
from sde_engine.grid import BrownianDriver
from wiener.errors import NonFiniteEvaluation
from wiener.exponential import exp_martingale
from wiener.integrals import wiener_integral

logger = logging.getLogger(__name__)

FD_EPS = 1e-4


@dataclass
class WienerFunctional:
    """F(B) with an optional analytic derivative (driver, h) -> dF(h)"""

    evaluate: Callable[[BrownianDriver], np.ndarray]
    derivative: Optional[Callable[[BrownianDriver, CameronMartinVector], np.ndarray]] = None
    label: str = ""

    def __call__(self, driver: BrownianDriver) -> np.ndarray:
        return self.evaluate(driver)


def _finite(values: np.ndarray, label: str, eps: float) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteEvaluation(f"{label or 'functional'} is not finite at eps={eps:g}")
    return values


def _central(F: WienerFunctional, driver: BrownianDriver, shift: np.ndarray, eps: float) -> np.ndarray:
    plus = _finite(F(driver.perturbed(shift, eps)), F.label, eps)
    minus = _finite(F(driver.perturbed(shift, -eps)), F.label, -eps)
    return (plus - minus) / (2 * eps)


def malliavin_derivative_fd(
    F: WienerFunctional,
    driver: BrownianDriver,
    h: CameronMartinVector,
    eps: float = FD_EPS,
    richardson: bool = False
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    dF(h) = (F(B + eps h) - F(B - eps h)) / (2 eps).

    With richardson set the quotient is also taken at eps/2; returns the
    extrapolated value and |d(eps/2) - d(eps)| per path.
    """
    shift = h.along(driver.batch_shape, steps=True) * driver.grid.dt
    d = _central(F, driver, shift, eps)
    if not richardson:
        return d
    d_half = _central(F, driver, shift, eps / 2)
    return (4 * d_half - d) / 3, np.abs(d_half - d)


def derivative(F: WienerFunctional, driver: BrownianDriver, h: CameronMartinVector) -> np.ndarray:
    """Analytic derivative when F has one, else the central quotient"""
    if F.derivative is not None:
        return F.derivative(driver, h)
    return malliavin_derivative_fd(F, driver, h)


def flat_ibp_sample(F: WienerFunctional, driver: BrownianDriver, h: CameronMartinVector) -> Tuple[np.ndarray, np.ndarray]:
    """Per-path pair (dF(h), F int <h', dB>), equal in mean"""
    values = F(driver)
    return derivative(F, driver, h), values * wiener_integral(driver, h)


def constant_functional(c: float) -> WienerFunctional:
    return WienerFunctional(
        evaluate=lambda driver: np.full(driver.batch_shape, float(c)),
        derivative=lambda driver, h: np.zeros(driver.batch_shape),
        label="constant"
    )


def linear_terminal(c: np.ndarray) -> WienerFunctional:
    """F = <B_T, c>, dF(h) = <h_T, c>"""
    c = np.asarray(c, dtype=float)
    return WienerFunctional(
        evaluate=lambda driver: np.sum(driver.terminal() * c, axis=-1),
        derivative=lambda driver, h: np.broadcast_to(np.sum(h.values()[-1] * c, axis=-1), driver.batch_shape),
        label="linear_terminal"
    )


def exp_martingale_functional(a: CameronMartinVector) -> WienerFunctional:
    """F = epsilon(a), dF(h) = epsilon(a) <a, h>_H with step slopes"""

    def d_exp(driver, h):
        inner = np.sum(np.sum(a.step_slopes() * h.step_slopes(), axis=-1), axis=0) * driver.grid.dt
        return exp_martingale(driver, a) * inner

    return WienerFunctional(evaluate=lambda driver: exp_martingale(driver, a), derivative=d_exp, label="exp_martingale")


def sine_of_marginal(t: float, c: np.ndarray) -> WienerFunctional:
    """F = sin(<B_t, c>) with t snapped to the grid"""
    c = np.asarray(c, dtype=float)

    def marginal(driver):
        return np.sum(driver.path()[driver.grid.index_of(t)] * c, axis=-1)

    def d_sine(driver, h):
        shift = np.sum(h.values()[driver.grid.index_of(t)] * c, axis=-1)
        return np.cos(marginal(driver)) * shift

    return WienerFunctional(evaluate=lambda driver: np.sin(marginal(driver)), derivative=d_sine, label=f"sin@{t}")
