"""Chaos expansions of polynomials of B_T and the remainder-derivative identity"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate

from harness.schemas import EstimateWithCI
from harness.stats import Z_MAX, estimate
from sde_engine.grid import BrownianDriver
from wiener.errors import InvalidCoefficient

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-14


def hermite(j: int, x: np.ndarray, t: float) -> np.ndarray:
    """Space-time Hermite polynomial H_j(x, t) = t^{j/2} He_j(x / sqrt t)"""
    if t == 0:
        return np.asarray(x, dtype=float) ** j
    root = np.sqrt(t)
    unit = np.zeros(j + 1)
    unit[j] = 1.0
    return root ** j * hermite_e.hermeval(np.asarray(x, dtype=float) / root, unit)


@dataclass
class PolynomialFunctional:
    """
    f = p(B_T) for a one-dimensional driver, p given by power-basis coefficients.

    Its chaos expansion is f = sum_j c_j H_j(B_T, T), and H_j(B_T, T) is the
    order-j iterated integral of the constant coefficient 1.
    """

    coefficients: List[float]
    horizon: float = 1.0
    label: str = ""

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def chaos_coefficients(self) -> np.ndarray:
        """c_j with p(x) = sum_j c_j H_j(x, T)"""
        t = self.horizon
        c = np.zeros(self.degree + 1)
        for n, p_n in enumerate(self.coefficients):
            if p_n == 0:
                continue
            monomial = np.zeros(n + 1)
            monomial[n] = 1.0
            b = hermite_e.poly2herme(monomial)
            for j, b_nj in enumerate(b):
                c[j] += p_n * b_nj * t ** ((n - j) / 2)
        return c

    def chaos_order(self) -> int:
        c = self.chaos_coefficients()
        nonzero = np.nonzero(np.abs(c) > 0)[0]
        return int(nonzero[-1]) if nonzero.size else 0

    def evaluate(self, driver: BrownianDriver) -> np.ndarray:
        if driver.m != 1:
            raise InvalidCoefficient(f"Polynomial functionals need m = 1, driver has m = {driver.m}")
        return np.polynomial.polynomial.polyval(driver.terminal()[..., 0], self.coefficients)

    def remainder_derivative_sq(self, b_t: np.ndarray, k: int) -> np.ndarray:
        """int_0^T |D_s R_k|^2 ds = T (sum_{j>k} c_j j H_{j-1}(B_T, T))^2 per sample"""
        c = self.chaos_coefficients()
        t = self.horizon
        total = np.zeros(np.shape(b_t))
        for j in range(k + 1, self.degree + 1):
            total = total + c[j] * j * hermite(j - 1, b_t, t)
        return t * total ** 2

    def remainder_derivative_norm_sq(self, k: int) -> float:
        """|dR_k|^2 = T sum_{j>k} c_j^2 j^2 (j-1)! T^{j-1}"""
        c = self.chaos_coefficients()
        t = self.horizon
        return float(sum(t * c[j] ** 2 * j ** 2 * math.factorial(j - 1) * t ** (j - 1)
                         for j in range(k + 1, self.degree + 1)))

    def _remainder_terms(self, k: int):
        # (weight, p) pairs: a_{k+1}(s) = sum weight H_p(B_s, s), p = j - k - 1
        c = self.chaos_coefficients()
        return [(c[j] * math.factorial(j) / math.factorial(j - k - 1), j - k - 1) for j in range(k + 1, self.degree + 1)]

    def remainder_coefficient_norms(self, k: int):
        """
        |a_{k+1}|^2 and |da_{k+1}|^2 on the (k+1)-simplex by quadrature.

        a_{k+1} depends only on its first time s, so the simplex integral reduces
        to int_0^T E|a(s)|^2 (T-s)^k / k! ds.
        """
        t = self.horizon
        terms = self._remainder_terms(k)

        def volume(s):
            return (t - s) ** k / math.factorial(k)

        def second_moment(s):
            return sum(w ** 2 * math.factorial(p) * s ** p for w, p in terms)

        def derivative_moment(s):
            return s * sum(w ** 2 * p ** 2 * math.factorial(p - 1) * s ** (p - 1) for w, p in terms if p > 0)

        a_sq, _ = integrate.quad(lambda s: second_moment(s) * volume(s), 0.0, t, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        da_sq, _ = integrate.quad(lambda s: derivative_moment(s) * volume(s), 0.0, t, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        return float(a_sq), float(da_sq)


def polynomial_functional(coefficients: List[float], horizon: float = 1.0, label: str = "") -> PolynomialFunctional:
    return PolynomialFunctional(list(map(float, coefficients)), horizon, label)


@dataclass
class ChaosIdentityResult:
    """|dR_k|^2 against (k+1)|a_{k+1}|^2 + |da_{k+1}|^2"""

    k: int
    lhs: float
    a_norm_sq: float
    da_norm_sq: float
    trivial: bool = False
    monte_carlo: Optional[EstimateWithCI] = None
    notes: List[str] = field(default_factory=list)

    @property
    def rhs(self) -> float:
        return (self.k + 1) * self.a_norm_sq + self.da_norm_sq

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_error(self) -> float:
        return self.residual / abs(self.lhs) if self.lhs else self.residual


def chaos_remainder_identity_check(
    f: PolynomialFunctional,
    k: int,
    driver: Optional[BrownianDriver] = None,
    z_max: float = Z_MAX
) -> ChaosIdentityResult:
    """
    Both sides of |dR_k|^2 = (k+1)|a_{k+1}|^2 + |da_{k+1}|^2.

    The left side is the closed form of E int |D_s R_k|^2 ds; the right side is
    integrated numerically from the remainder coefficient. With a driver, the
    left side is also estimated by Monte Carlo from B_T.
    """
    if k < 0:
        raise InvalidCoefficient(f"Remainder index must be non-negative, got {k}")
    if f.chaos_order() <= k:
        logger.warning(f"{f.label or 'functional'} has chaos order {f.chaos_order()} <= {k}; both sides vanish")
        return ChaosIdentityResult(k=k, lhs=0.0, a_norm_sq=0.0, da_norm_sq=0.0, trivial=True)
    lhs = f.remainder_derivative_norm_sq(k)
    a_sq, da_sq = f.remainder_coefficient_norms(k)
    result = ChaosIdentityResult(k=k, lhs=lhs, a_norm_sq=a_sq, da_norm_sq=da_sq)
    if driver is not None:
        samples = f.remainder_derivative_sq(driver.terminal()[..., 0], k)
        result.monte_carlo = estimate(samples, result.rhs, z_max=z_max, seed=driver.seed)
    logger.debug(f"Chaos identity k={k}: lhs {lhs:.6g}, rhs {result.rhs:.6g}")
    return result
