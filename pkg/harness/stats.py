"""Monte Carlo estimates, z-tests and order fits"""
import logging
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from harness.schemas import AssertionResult, EstimateWithCI

logger = logging.getLogger(__name__)

Z_MAX = 4.0
EXACT_TOL = 1e-12


def _z(mean: float, target: float, se: float) -> float:
    if se > 0:
        return (mean - target) / se
    return 0.0 if abs(mean - target) <= EXACT_TOL * max(1.0, abs(target)) else float("inf")


def estimate(samples: np.ndarray, target: float, z_max: float = Z_MAX, seed: Optional[int] = None) -> EstimateWithCI:
    """Sample mean with standard error and a two-sided z-test against target"""
    x = np.asarray(samples, dtype=float).reshape(-1)
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    z = _z(mean, target, se)
    return EstimateWithCI(mean=mean, se=se, n=n, target=float(target), z=z, passed=bool(abs(z) <= z_max), seed=seed)


def variance_estimate(samples: np.ndarray, target: float, z_max: float = Z_MAX, seed: Optional[int] = None) -> EstimateWithCI:
    """Sample variance about zero mean, SE from the fourth moment"""
    x = np.asarray(samples, dtype=float).reshape(-1)
    sq = x * x
    return estimate(sq, target, z_max=z_max, seed=seed)


def correlation_estimate(a: np.ndarray, b: np.ndarray, z_max: float = Z_MAX, seed: Optional[int] = None) -> EstimateWithCI:
    """Sample correlation against 0 with the large-sample SE 1/sqrt(n)"""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = a.size
    r = float(np.corrcoef(a, b)[0, 1])
    se = 1.0 / np.sqrt(n)
    z = r / se
    return EstimateWithCI(mean=r, se=se, n=n, target=0.0, z=z, passed=bool(abs(z) <= z_max), seed=seed)


def p_value(z: float) -> float:
    return float(2 * stats.norm.sf(abs(z)))


def from_estimate(name: str, est: EstimateWithCI, z_max: float = Z_MAX, bias: float = 0.0) -> AssertionResult:
    """Assertion |mean - target| <= z_max se + bias"""
    tol = z_max * est.se + bias
    passed = bool(abs(est.mean - est.target) <= tol)
    return AssertionResult(name=name, target=est.target, estimate=est.mean, se=est.se, z=est.z, tol=tol, passed=passed)


def assert_close(name: str, estimate_value: float, target: float, tol: float) -> AssertionResult:
    estimate_value = float(estimate_value)
    passed = bool(np.isfinite(estimate_value) and abs(estimate_value - target) <= tol)
    return AssertionResult(name=name, target=float(target), estimate=estimate_value, tol=float(tol), passed=passed)


def assert_at_most(name: str, value: float, bound: float) -> AssertionResult:
    value = float(value)
    passed = bool(np.isfinite(value) and value <= bound)
    return AssertionResult(name=name, target=float(bound), estimate=value, tol=0.0, passed=passed)


def assert_at_least(name: str, value: float, bound: float) -> AssertionResult:
    value = float(value)
    passed = bool(np.isfinite(value) and value >= bound)
    return AssertionResult(name=name, target=float(bound), estimate=value, tol=0.0, passed=passed)


def pass_rate(flags: Iterable[bool]) -> float:
    flags = list(flags)
    return float(np.mean(flags)) if flags else 0.0


def fit_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dt)"""
    slope, _ = np.polyfit(np.log(np.asarray(dts)), np.log(np.asarray(errors)), 1)
    return float(slope)
