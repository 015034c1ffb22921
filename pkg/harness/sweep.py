"""Convergence sweeps over coupled dt-halving levels"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from geometry.models import ManifoldModel, build_model
from harness.config import ExperimentConfig
from harness.errors import InvalidSweep, UnknownCheck
from harness.schemas import SweepResult
from harness.stats import EXACT_TOL, fit_order
from pathspace.cameron_martin import CameronMartinVector
from pathspace.forms import HOneForm, direct_l2_value, pullback_one_form
from pathspace.tangents import xbar
from sde_engine.covariant import covariant_derivative_path
from sde_engine.grid import BrownianDriver, TimeGrid, refine_driver
from sde_engine.integrator import integrate, select_path
from sde_engine.noise_split import conditional_resamples, decompose_noise, sup_distance
from sde_engine.variational import bismut_derivative
from transport.frames import build_transport

logger = logging.getLogger(__name__)

MIN_LEVELS = 3


def coupled_drivers(grid: TimeGrid, m: int, seed: int, indices: Sequence[int], levels: int) -> List[BrownianDriver]:
    """The coarse driver and its successive bridge refinements"""
    drivers = [BrownianDriver.sample(grid, m, seed, indices)]
    for _ in range(levels - 1):
        drivers.append(refine_driver(drivers[-1]))
    return drivers


def successive_differences(values: Sequence[np.ndarray]) -> List[float]:
    """|mean(level i+1 - level i)| for per-path values on coupled levels"""
    return [float(abs(np.mean(values[i + 1] - values[i]))) for i in range(len(values) - 1)]


def summarize_sweep(
    dts: Sequence[float],
    errors: Sequence[float],
    band: Optional[Tuple[float, float]] = None
) -> SweepResult:
    """
    Order fit with the exact/monotone flags.

    All errors at roundoff mark the sweep exact and passing with no order.
    Otherwise errors must decrease strictly with dt; a non-monotone sweep has an
    undefined order and fails. With a band the fitted order must fall inside it.
    """
    dts = [float(d) for d in dts]
    errors = [float(e) for e in errors]
    if all(e < EXACT_TOL for e in errors):
        return SweepResult(dts=dts, errors=errors, exact=True, monotone=True, passed=True, band=list(band) if band else None)
    monotone = all(errors[i + 1] < errors[i] for i in range(len(errors) - 1)) and all(e > 0 for e in errors)
    if not monotone:
        logger.warning(f"Non-monotone sweep errors {errors}; order undefined")
        return SweepResult(dts=dts, errors=errors, monotone=False, passed=False, band=list(band) if band else None)
    order = fit_order(dts, errors)
    passed = True if band is None else bool(band[0] <= order <= band[1])
    return SweepResult(dts=dts, errors=errors, order=order, passed=passed, band=list(band) if band else None)


def _levels(config: ExperimentConfig, default: int) -> int:
    levels = config.size("levels", default)
    if levels < MIN_LEVELS:
        raise InvalidSweep(f"A sweep needs at least {MIN_LEVELS} levels, got {levels}")
    return levels


def _unit_direction(grid: TimeGrid, m: int) -> CameronMartinVector:
    c = np.zeros(m)
    c[0] = 1.0
    return CameronMartinVector.constant(grid, c)


def bismut_covariant_errors(config: ExperimentConfig, levels: int) -> Tuple[List[float], List[float], List[float]]:
    """
    Mean over seeds of sup_t |gap| between the discrete Bismut derivative and
    the covariant route, per level, and the largest gap at t = T per level.
    """
    model = build_model("sphere")
    seeds = config.size("seeds", 8)
    finest = config.size("steps", 10_000)
    coarse = max(finest // 2 ** (levels - 1), 1)
    grid = TimeGrid(config.horizon, coarse)
    drivers = coupled_drivers(grid, model.m, config.seed, range(seeds), levels)
    dts, sup_errors, terminal = [], [], []
    for driver in drivers:
        path = integrate(model, None, driver)
        h = CameronMartinVector.from_function(driver.grid, lambda t: np.stack([np.cos(t), np.sin(t), np.ones_like(t)], axis=-1))
        reference = bismut_derivative(path, h).values
        covariant = covariant_derivative_path(path, decompose_noise(path), h).values
        gap = np.linalg.norm(reference - covariant, axis=-1)
        dts.append(driver.grid.dt)
        sup_errors.append(float(np.mean(np.max(gap, axis=0))))
        terminal.append(float(np.max(gap[-1])))
        logger.debug(f"bismut-vs-covariant dt={driver.grid.dt:.2e}: mean sup gap {sup_errors[-1]:.3e}")
    return dts, sup_errors, terminal


def group_intertwine_errors(config: ExperimentConfig, levels: int) -> Tuple[List[float], List[float]]:
    """sup_t |T I(h) - xbar h| on the rotation group, mean over seeds"""
    model = build_model("group")
    seeds = config.size("seeds", 8)
    finest = config.size("steps", 800)
    coarse = max(finest // 2 ** (levels - 1), 1)
    grid = TimeGrid(config.horizon, coarse)
    drivers = coupled_drivers(grid, model.m, config.seed, range(seeds), levels)
    dts, errors = [], []
    for driver in drivers:
        path = integrate(model, None, driver)
        frame = build_transport(path)
        h = CameronMartinVector.from_function(driver.grid, lambda t: np.stack([np.ones_like(t), t, t ** 2], axis=-1))
        gap = np.linalg.norm(bismut_derivative(path, h).values - xbar(path, frame, h).values, axis=-1)
        dts.append(driver.grid.dt)
        errors.append(float(np.mean(np.max(gap, axis=0))))
    return dts, errors


def heun_weak_errors(config: ExperimentConfig, levels: int) -> Tuple[List[float], List[float]]:
    """
    Successive-level differences of E<x_T, x_0> on the sphere, starting from
    a 32-step coarsest level by default.
    """
    model = build_model("sphere")
    paths = config.size("paths", 50_000)
    coarse = config.size("steps", 32)
    grid = TimeGrid(config.horizon, coarse)
    drivers = coupled_drivers(grid, model.m, config.seed, range(paths), levels)
    values = []
    for driver in drivers:
        path = integrate(model, None, driver)
        values.append(np.sum(path.terminal() * path.x0, axis=-1))
    dts = [d.grid.dt for d in drivers[:-1]]
    return dts, successive_differences(values)


def pullback_errors(config: ExperimentConfig, levels: int) -> Tuple[List[float], List[float]]:
    """Mean |I*(phi)(h) - phi(T I h)| for an L^2-density form"""
    model = build_model("sphere")
    paths = config.size("paths", 10_000)
    finest = config.size("steps", 200)
    coarse = max(finest // 2 ** (levels - 1), 1)
    grid = TimeGrid(config.horizon, coarse)
    drivers = coupled_drivers(grid, model.m, config.seed, range(paths), levels)
    dts, errors = [], []
    for driver in drivers:
        path = integrate(model, None, driver)
        frame = build_transport(path)
        h = _unit_direction(driver.grid, model.m)
        tangent = bismut_derivative(path, h, check_flow=False).values
        form = HOneForm.from_l2_density(path, frame, smooth_covector)
        pulled = pullback_one_form(path, decompose_noise(path), frame, form, h, tangent=tangent)
        direct = direct_l2_value(path, smooth_covector, tangent)
        dts.append(driver.grid.dt)
        errors.append(float(np.mean(np.abs(pulled - direct))))
    return dts, errors


def reconstruct_errors(config: ExperimentConfig, levels: int) -> Tuple[List[float], List[float]]:
    """Mean sup distance of redundant-noise resamples from their base path"""
    model = build_model("sphere")
    resamples = config.size("resamples", 64)
    coarse = config.size("steps", 50)
    grid = TimeGrid(config.horizon, coarse)
    drivers = coupled_drivers(grid, model.m, config.seed, [0], levels)
    dts, errors = [], []
    for driver in drivers:
        base = select_path(integrate(model, None, driver), 0)
        split = decompose_noise(base)
        _, resampled, _ = conditional_resamples(base, split, resamples, config.seed, tol=np.inf)
        dts.append(driver.grid.dt)
        errors.append(float(np.mean(sup_distance(base, resampled))))
    return dts, errors


def smooth_covector(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    alpha(t, x) = (1 + t) (x_{d-1}, 1, x_0, ..., x_{d-3}) in ambient coordinates.

    On the sphere (d = 3) this is (1 + t) (x_2, 1, x_0); on the flattened
    rotation group (d = 9) it mixes the matrix entries the same way.
    """
    c = np.concatenate([x[..., -1:], np.ones_like(x[..., :1]), x[..., : x.shape[-1] - 2]], axis=-1)
    return (1.0 + t) * c


# check id -> (error generator, default levels, order band)
SWEEPS: Dict[str, Tuple[Callable, int, Optional[Tuple[float, float]]]] = {
    "bismut-vs-covariant": (lambda c, n: bismut_covariant_errors(c, n)[:2], 4, (0.8, 1.5)),
    "intertwine-group": (group_intertwine_errors, 4, (0.8, np.inf)),
    "heun-weak-sweep": (heun_weak_errors, 4, (0.8, 2.2)),
    "pullback-consistency": (pullback_errors, 4, (0.4, np.inf)),
    "reconstruct-sweep": (reconstruct_errors, 4, (0.3, 1.2)),
}


def convergence_sweep(config: ExperimentConfig, check_id: str, levels: Optional[int] = None) -> SweepResult:
    """Run the sweep registered for check_id over coupled levels"""
    if check_id not in SWEEPS:
        raise UnknownCheck(f"No convergence sweep for check: {check_id}")
    generator, default_levels, band = SWEEPS[check_id]
    levels = _levels(config, default_levels) if levels is None else levels
    if levels < MIN_LEVELS:
        raise InvalidSweep(f"A sweep needs at least {MIN_LEVELS} levels, got {levels}")
    logger.info(f"Sweeping {check_id} over {levels} levels")
    dts, errors = generator(config, levels)
    return summarize_sweep(dts, errors, band)
