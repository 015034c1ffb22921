"""Discrete Ito integrals, divergence of Cameron-Martin fields and iterated integrals"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from pathspace.cameron_martin import CameronMartinVector
from sde_engine.grid import BrownianDriver, TimeGrid
from wiener.errors import InvalidCoefficient

logger = logging.getLogger(__name__)

# (k, B at nodes 0..k) -> integrand at t_k, shape (*batch, m)
Integrand = Callable[[int, np.ndarray], np.ndarray]

# Dense coefficients beyond this many entries are refused
MAX_DENSE_ENTRIES = 50_000_000


def ito_integral(driver: BrownianDriver, integrand: Integrand) -> np.ndarray:
    """
    sum_k <a_{t_k}, dB_k> with a evaluated at the left endpoint.

    The integrand only sees a read-only view of B up to t_k, so it cannot use
    future increments.

    Returns:
        One value per path
    """
    path = driver.path()
    path.flags.writeable = False
    total = np.zeros(driver.batch_shape)
    for k in range(driver.grid.steps):
        a = integrand(k, path[: k + 1])
        total = total + np.sum(a * driver.increments[k], axis=-1)
    return total


def ito_sum(values: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """sum_k <values_k, increments_k> for precomputed left-point values (N, *batch, m)"""
    return np.sum(np.sum(values * increments, axis=-1), axis=0)


def wiener_integral(driver: BrownianDriver, h: CameronMartinVector) -> np.ndarray:
    """int <h', dB> with the step slopes of h"""
    return ito_sum(h.along(driver.batch_shape, steps=True), driver.increments)


def divergence_of_h(driver: BrownianDriver, h: CameronMartinVector) -> np.ndarray:
    """div h = -int <h', dB>; Skorohod and Ito agree for deterministic h"""
    return -wiener_integral(driver, h)


def strict_simplex_mask(steps: int, order: int) -> np.ndarray:
    """Boolean (steps,)*order mask of j_1 < ... < j_order"""
    idx = np.indices((steps,) * order)
    mask = np.ones((steps,) * order, dtype=bool)
    for a in range(order - 1):
        mask &= idx[a] < idx[a + 1]
    return mask


@dataclass
class ChaosCoefficient:
    """
    Coefficient alpha_k of an order-k iterated integral on the discrete simplex.

    Either `constant` (an (m,)*k tensor, constant in time) or `dense` (shape
    (N,)*k + (m,)*k, entries off the strict simplex ignored) is given. Order 0
    carries a scalar in `value`.
    """

    grid: TimeGrid
    order: int
    m: int = 1
    constant: Optional[np.ndarray] = None
    dense: Optional[np.ndarray] = None
    value: float = 0.0

    def __post_init__(self):
        if self.order < 0:
            raise InvalidCoefficient(f"Order must be non-negative, got {self.order}")
        if self.order == 0:
            return
        if (self.constant is None) == (self.dense is None):
            raise InvalidCoefficient("Give exactly one of constant or dense coefficients")
        tensor = (self.m,) * self.order
        if self.constant is not None:
            self.constant = np.broadcast_to(np.asarray(self.constant, dtype=float), tensor)
        else:
            self.dense = np.asarray(self.dense, dtype=float)
            expected = (self.grid.steps,) * self.order + tensor
            if self.dense.shape != expected:
                raise InvalidCoefficient(f"Dense coefficient has shape {self.dense.shape}, expected {expected}")

    def masked(self) -> np.ndarray:
        """Dense representation restricted to the strict simplex"""
        n, k = self.grid.steps, self.order
        if (n * self.m) ** k > MAX_DENSE_ENTRIES:
            raise InvalidCoefficient(f"Dense order-{k} coefficient on {n} steps is too large")
        mask = strict_simplex_mask(n, k).reshape((n,) * k + (1,) * k)
        if self.constant is not None:
            return mask * self.constant
        return mask * self.dense

    def l2_norm_sq(self) -> float:
        """Grid-measure norm on the strict simplex: sum alpha^2 dt^k"""
        if self.order == 0:
            return float(self.value ** 2)
        dt_k = self.grid.dt ** self.order
        if self.constant is not None:
            return float(math.comb(self.grid.steps, self.order) * np.sum(self.constant ** 2) * dt_k)
        return float(np.sum(self.masked() ** 2) * dt_k)

    def second_moment(self) -> float:
        """E[I_k(alpha)^2] = (k!)^2 |alpha|^2 on the discrete simplex"""
        return float(math.factorial(self.order) ** 2 * self.l2_norm_sq())


def _iterated_constant(increments: np.ndarray, c: np.ndarray, order: int) -> np.ndarray:
    # S_r accumulates sum_{j_1<...<j_r} dB_{j_1} x ... x dB_{j_r}
    batch = increments.shape[1:-1]
    sums = [np.ones(batch)] + [np.zeros(batch + c.shape[:r]) for r in range(1, order + 1)]
    for db in increments:
        for r in range(order, 0, -1):
            sums[r] = sums[r] + sums[r - 1][..., None] * db.reshape(batch + (1,) * (r - 1) + db.shape[-1:])
    axes = tuple(range(-order, 0))
    return np.sum(sums[order] * c, axis=axes)


def _iterated_dense(increments: np.ndarray, coeff: np.ndarray, order: int) -> np.ndarray:
    n = increments.shape[0]
    m = increments.shape[-1]
    batch = increments.shape[1:-1]
    # pair the time and noise axes as (j_1, i_1, ..., j_k, i_k)
    perm = [ax for r in range(order) for ax in (r, order + r)]
    paired = np.transpose(coeff, perm).reshape((n * m,) * order)
    flat = np.moveaxis(increments, 0, -2).reshape((-1, n * m))
    res = np.tensordot(flat, paired, axes=([1], [0]))
    for _ in range(order - 1):
        res = np.einsum("pa,pa...->p...", flat, res)
    return res.reshape(batch)


def iterated_integral(driver: BrownianDriver, alpha: ChaosCoefficient) -> np.ndarray:
    """
    I_k(alpha) = k! sum_{j_1<...<j_k} alpha(j_1..j_k) dB_{j_1} ... dB_{j_k}.

    Time-constant coefficients use a running-sum recursion over the steps;
    dense coefficients are contracted step axis by step axis.

    Args:
        driver: Brownian driver with m matching alpha
        alpha: Chaos coefficient on the driver's grid

    Returns:
        One value per path
    """
    if alpha.order == 0:
        return np.full(driver.batch_shape, float(alpha.value))
    if alpha.m != driver.m:
        raise InvalidCoefficient(f"Coefficient has m={alpha.m}, driver has m={driver.m}")
    if alpha.grid != driver.grid:
        raise InvalidCoefficient(f"Coefficient grid {alpha.grid} differs from driver grid {driver.grid}")
    if alpha.constant is not None:
        raw = _iterated_constant(driver.increments, alpha.constant, alpha.order)
    else:
        raw = _iterated_dense(driver.increments, alpha.masked(), alpha.order)
    return math.factorial(alpha.order) * raw
