"""Check catalog and run orchestration"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from geometry.models import ManifoldModel, build_model
from geometry.oracles import fd_lw_section_derivative, metric_compatibility_defect, ricci_oracle
from harness.config import ExperimentConfig
from harness.errors import UnknownCheck
from harness.fanout import map_paths
from harness.report import dumps_17g
from harness.schemas import AssertionResult, CheckReport, SweepResult
from harness.stats import (
    assert_at_least,
    assert_at_most,
    assert_close,
    correlation_estimate,
    estimate,
    from_estimate,
    pass_rate,
    variance_estimate,
)
from harness.sweep import (
    bismut_covariant_errors,
    convergence_sweep,
    smooth_covector,
    summarize_sweep,
)
from pathspace.cameron_martin import CameronMartinVector
from pathspace.cylindrical import (
    CylindricalFunction,
    cylindrical_dH,
    exp_of_marginal,
    linear_marginal,
    product_of_marginals,
)
from pathspace.divergence import pathspace_ibp_sample
from pathspace.forms import (
    HOneForm,
    conditional_moment_ratio,
    conditional_pullback_check,
    pullback_one_form,
)
from pathspace.tangents import xbar
from sde_engine.grid import BrownianDriver, TimeGrid
from sde_engine.integrator import SolutionPath, integrate, select_path
from sde_engine.noise_split import (
    check_recombination,
    conditional_resamples,
    decompose_noise,
    divergence_tolerance,
    reconstruct_driver,
    sup_distance,
)
from sde_engine.random_streams import Channel, keyed_generator
from sde_engine.variational import bismut_derivative
from transport.frames import build_transport
from wiener.chaos import chaos_remainder_identity_check, polynomial_functional
from wiener.derivative import exp_martingale_functional, flat_ibp_sample, malliavin_derivative_fd, sine_of_marginal
from wiener.exponential import (
    conditional_exp_martingale,
    conditional_exp_martingale_check,
    exp_martingale,
    exp_martingale_moments,
)
from wiener.integrals import ChaosCoefficient, ito_integral, iterated_integral

logger = logging.getLogger(__name__)

# Statistical tolerance of the "within 3 SE" checks
Z_THREE = 3.0

# Largest max/min ratio of conditional sup moments across base paths before the flag
RATIO_SPREAD_LIMIT = 10.0


@dataclass
class CheckOutcome:
    assertions: List[AssertionResult] = field(default_factory=list)
    sweeps: List[SweepResult] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    trivial: bool = False


# --- shared helpers ---

def _simulate(model: ManifoldModel, grid: TimeGrid, seed: int, indices: Sequence[int]) -> SolutionPath:
    driver = BrownianDriver.sample(grid, model.m, seed, indices)
    return integrate(model, None, driver)


def _base_path(model: ManifoldModel, grid: TimeGrid, seed: int, index: int) -> SolutionPath:
    return select_path(_simulate(model, grid, seed, [index]), 0)


def _unit(m: int, i: int) -> np.ndarray:
    e = np.zeros(m)
    e[i % m] = 1.0
    return e


def _directions(grid: TimeGrid, m: int) -> Dict[str, CameronMartinVector]:
    """Three test directions: constant, oscillating and linearly growing slopes"""
    return {
        "const": CameronMartinVector.constant(grid, _unit(m, 0)),
        "cos": CameronMartinVector.from_function(grid, lambda t: np.cos(np.pi * t)[:, None] * _unit(m, 1)),
        "ramp": CameronMartinVector.from_function(grid, lambda t: t[:, None] * _unit(m, 2)),
    }


def _cylindricals(grid: TimeGrid, d: int) -> Dict[str, CylindricalFunction]:
    """Three test functions of one or two marginals"""
    horizon = grid.horizon
    return {
        "linear": linear_marginal(grid, horizon, _unit(d, 0)),
        "product": product_of_marginals(grid, horizon / 2, _unit(d, 1), horizon, _unit(d, 0) + _unit(d, 2)),
        "exp": exp_of_marginal(grid, horizon / 2, 0.5 * _unit(d, 0)),
    }


def _rate_assertion(name: str, flags: Sequence[bool], threshold: float) -> AssertionResult:
    return assert_at_least(f"{name} pass rate ({len(flags)} tests)", pass_rate(flags), threshold)


def _map_bases(config: ExperimentConfig, count: int, fn: Callable[[int], np.ndarray]) -> np.ndarray:
    """Run fn per base path index; rows come back in index order"""
    return map_paths(lambda idx: np.stack([fn(int(i)) for i in idx]), count, chunk_size=1, workers=config.workers)


def heat_kernel_target(model: ManifoldModel, horizon: float) -> float:
    """E<x_T, x_0> in ambient coordinates"""
    if model.name == "sphere":
        return float(np.exp(-model.n * horizon / 2))
    # E g_T = exp(-T) I for the left-invariant system
    return float(3 * np.exp(-horizon))


# --- geometry ---

def check_lw_connection(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    rng = keyed_generator(config.seed, 0, Channel.AUX)
    count = config.size("paths", 1000)
    x = model.random_point(rng, count)
    v = model.random_tangent(rng, x)
    w = rng.standard_normal((count, model.m))
    w2 = rng.standard_normal((count, model.m))
    e_perp = np.einsum("...ij,...j->...i", model.kernel_complement(x), w)
    analytic = model.lw_derivative_of_section(x, v, w)
    fd = fd_lw_section_derivative(model, x, v, w)
    outcome = CheckOutcome()
    outcome.assertions += [
        assert_at_most("analytic derivative of parallel sections", np.max(np.abs(model.lw_derivative_of_section(x, v, e_perp))), config.tol(1e-12)),
        assert_at_most("finite-difference derivative of parallel sections", np.max(np.abs(fd_lw_section_derivative(model, x, v, e_perp))), config.tol(1e-6)),
        assert_at_most("analytic vs finite-difference LW derivative", np.max(np.abs(analytic - fd)), config.tol(1e-6)),
        assert_at_most("metric compatibility defect", np.max(np.abs(metric_compatibility_defect(model, x, v, w, w2))), config.tol(1e-6)),
    ]
    return outcome


def check_ricci_oracle(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    rng = keyed_generator(config.seed, 0, Channel.AUX)
    count = config.size("paths", 100)
    x = model.random_point(rng, count)
    v = model.random_tangent(rng, x)
    analytic = model.ricci_sharp(x, v)
    outcome = CheckOutcome()
    if model.name == "group":
        outcome.assertions.append(assert_at_most("analytic Ricci vanishes", np.max(np.abs(analytic)), 0.0))
    outcome.assertions.append(
        assert_at_most("analytic vs curvature-trace Ricci", np.max(np.abs(analytic - ricci_oracle(model, x, v))), config.tol(1e-4))
    )
    return outcome


# --- sde_engine and transport ---

def check_heat_kernel_moment(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    paths = config.size("paths", 100_000)

    def moments(idx):
        path = _simulate(model, grid, config.seed, idx)
        return np.sum(path.terminal() * path.x0, axis=-1)

    samples = map_paths(moments, paths, config.chunk_size, config.workers)
    est = estimate(samples, heat_kernel_target(model, config.horizon), z_max=Z_THREE, seed=config.seed)
    outcome = CheckOutcome()
    outcome.assertions.append(from_estimate("E<x_T, x_0>", est, z_max=Z_THREE, bias=5 * grid.dt))
    return outcome


def check_transport_decay(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    path = _simulate(model, grid, config.seed, range(config.size("paths", 32)))
    frame = build_transport(path)
    base = frame.base
    kappa = float(model.inner(model.ricci_sharp(path.x0[0], base[:, 0]), base[:, 0]))
    cols = frame.damped_columns()
    lengths = np.sqrt(model.metric_scale * np.sum(cols ** 2, axis=-2))
    t = grid.times.reshape((-1,) + (1,) * (lengths.ndim - 1))
    deviation = np.max(np.abs(lengths * np.exp(0.5 * kappa * t) - 1.0))
    spread = np.max(np.abs(frame.damping - frame.damping[:, :1]))
    outcome = CheckOutcome(notes=[f"Ricci eigenvalue {kappa:.6g}"])
    outcome.assertions += [
        assert_at_most("damped length against exp(-kappa t / 2)", deviation, config.tol(1e-8)),
        assert_at_most("damping identical across paths", spread, config.tol(1e-12)),
        assert_at_most("parallel frame isometry defect", frame.isometry_defect(), config.tol(1e-8)),
    ]
    return outcome


def check_bismut_vs_covariant(config: ExperimentConfig) -> CheckOutcome:
    levels = config.size("levels", 4)
    dts, errors, terminal = bismut_covariant_errors(config, levels)
    sweep = summarize_sweep(dts, errors, (0.8, 1.5))
    outcome = CheckOutcome(sweeps=[sweep], notes=[f"dt {d:.3e}: mean sup_t gap {e:.3e}" for d, e in zip(dts, errors)])
    outcome.assertions.append(assert_at_most(f"largest gap at t=T over seeds, dt={dts[-1]:.1e}", terminal[-1], config.tol(1e-2)))
    if sweep.order is not None:
        outcome.assertions.append(assert_at_least("observed order", sweep.order, 0.8))
    return outcome


def check_noise_split(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 100))
    paths = config.size("paths", 100_000)

    def split_stats(idx):
        path = _simulate(model, grid, config.seed, idx)
        split = decompose_noise(path)
        residual = np.full(len(idx), check_recombination(split, path.driver))
        defect = np.full(len(idx), split.orthogonality_defect())
        beta_t = np.sum(split.beta_coordinates(), axis=0)
        first = beta_t[:, 0] if split.rank else np.zeros(len(idx))
        return residual, defect, first

    residual, defect, beta_t = map_paths(split_stats, paths, config.chunk_size, config.workers)
    outcome = CheckOutcome()
    outcome.assertions += [
        assert_at_most("recombination residual", np.max(residual), config.tol(1e-12)),
        assert_at_most("noise frame orthogonality defect", np.max(defect), config.tol(1e-8)),
    ]
    if model.kernel_basis(model.base_point).shape[1] == 0:
        outcome.trivial = True
        outcome.notes.append("no redundant noise on this model")
        return outcome
    est = variance_estimate(beta_t, config.horizon, z_max=config.z_max, seed=config.seed)
    outcome.assertions.append(from_estimate("Var(beta_T)", est, z_max=config.z_max))
    return outcome


def check_beta_independence(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 100))
    paths = config.size("paths", 20_000)
    outcome = CheckOutcome()
    if model.kernel_basis(model.base_point).shape[1] == 0:
        outcome.trivial = True
        outcome.notes.append("no redundant noise on this model")
        outcome.assertions.append(assert_close("redundant rank", 0, 0, 0.0))
        return outcome
    mid = grid.steps // 2

    def stats(idx):
        path = _simulate(model, grid, config.seed, idx)
        beta_t = np.sum(decompose_noise(path).beta_coordinates(), axis=0)[:, 0]
        return beta_t, path.terminal(), np.sum(path.points[mid] * path.x0, axis=-1)

    beta_t, terminal, moment = map_paths(stats, paths, config.chunk_size, config.workers)
    for i in range(model.d):
        est = correlation_estimate(beta_t, terminal[:, i], z_max=config.z_max, seed=config.seed)
        outcome.assertions.append(from_estimate(f"corr(beta_T, x_T[{i}])", est, z_max=config.z_max))
    est = correlation_estimate(beta_t, moment, z_max=config.z_max, seed=config.seed)
    outcome.assertions.append(from_estimate("corr(beta_T, <x_T/2, x_0>)", est, z_max=config.z_max))
    return outcome


def check_reconstruct_sweep(config: ExperimentConfig) -> CheckOutcome:
    model = build_model("sphere")
    grid = TimeGrid(config.horizon, config.size("steps", 200))
    base = _base_path(model, grid, config.seed, 0)
    split = decompose_noise(base)
    _, own = reconstruct_driver(base, split, split.beta_coordinates()[:, None, :])
    _, fresh, _ = conditional_resamples(base, split, config.size("resamples", 64), config.seed, tol=np.inf)
    distance = float(np.max(sup_distance(base, fresh)))
    sweep = convergence_sweep(config, "reconstruct-sweep")
    outcome = CheckOutcome(sweeps=[sweep], notes=[f"max resample distance / dt = {distance / grid.dt:.3g}"])
    outcome.assertions += [
        assert_at_most("own redundant noise reproduces the path", float(np.max(sup_distance(base, own))), config.tol(1e-10)),
        assert_at_most("resample distance within default tolerance", distance, divergence_tolerance(grid.dt, config.tol_scale)),
    ]
    return outcome


def check_heun_weak_sweep(config: ExperimentConfig) -> CheckOutcome:
    sweep = convergence_sweep(config, "heun-weak-sweep")
    return CheckOutcome(sweeps=[sweep], assertions=[assert_at_least("weak sweep resolved", float(sweep.passed), 1.0)])


# --- pathspace ---

def check_intertwine_fd(config: ExperimentConfig, eps: float = 1e-4) -> CheckOutcome:
    model = build_model("sphere")
    grid = TimeGrid(config.horizon, config.size("steps", 10_000))
    path = _simulate(model, grid, config.seed, range(config.size("seeds", 8)))
    functions = _cylindricals(grid, model.d)
    outcome = CheckOutcome()
    for h_name, h in _directions(grid, model.m).items():
        tangent = bismut_derivative(path, h, check_flow=False).values
        shift = h.along(path.batch_shape, steps=True) * grid.dt
        plus = integrate(model, None, path.driver.perturbed(shift, eps))
        minus = integrate(model, None, path.driver.perturbed(shift, -eps))
        for f_name, f in functions.items():
            fd = (f.value(plus) - f.value(minus)) / (2 * eps)
            gap = np.max(np.abs(cylindrical_dH(f, path, tangent) - fd))
            outcome.assertions.append(assert_at_most(f"d_H {f_name} along T I({h_name})", gap, config.tol(1e-3)))
    return outcome


def check_intertwine_group(config: ExperimentConfig) -> CheckOutcome:
    sweep = convergence_sweep(config, "intertwine-group")
    finest_dt = sweep.dts[-1]
    outcome = CheckOutcome(sweeps=[sweep])
    outcome.assertions.append(assert_at_most(f"sup |T I h - xbar h| at dt={finest_dt:.1e}", sweep.errors[-1], config.tol(10 * finest_dt)))
    return outcome


def check_filtering_projection(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    h = _directions(grid, model.m)["cos"] + _directions(grid, model.m)["const"]
    nodes = [grid.steps // 4, grid.steps // 2, grid.steps]
    outcome = CheckOutcome()
    if model.kernel_basis(model.base_point).shape[1] == 0:
        # no redundant noise: the derivative is its own projection
        path = _simulate(model, grid, config.seed, range(config.size("base_paths", 64)))
        gap = np.max(np.abs(bismut_derivative(path, h).values - xbar(path, build_transport(path), h).values))
        outcome.trivial = True
        outcome.notes.append("no redundant noise on this model")
        outcome.assertions.append(assert_at_most("T I h against xbar h", gap, config.tol(10 * grid.dt)))
        return outcome

    resamples = config.size("resamples", 512)

    def zscores(i):
        base = _base_path(model, grid, config.seed, i)
        frame = build_transport(base)
        target = frame.damped_inverse(xbar(base, frame, h).values)
        split = decompose_noise(base)
        _, resampled, _ = conditional_resamples(base, split, resamples, config.seed, base_index=i)
        tangent = bismut_derivative(resampled, h, check_flow=False).values
        coords = build_transport(resampled).damped_inverse(tangent)
        return np.array([
            estimate(coords[k, :, j], target[k, j], z_max=config.z_max).z
            for k in nodes for j in range(model.n)
        ])

    z = _map_bases(config, config.size("base_paths", 64), zscores)
    outcome.notes.append(f"max |z| {np.max(np.abs(z)):.3f} over {z.size} component tests")
    outcome.assertions.append(_rate_assertion("filtering z-test", list(np.abs(z).ravel() <= config.z_max), config.pass_rate))
    return outcome


def check_pathspace_ibp(config: ExperimentConfig) -> CheckOutcome:
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    paths = config.size("paths", 100_000)
    outcome = CheckOutcome()
    for name in ("sphere", "group"):
        model = build_model(name)
        functions = list(_cylindricals(grid, model.d).items())
        directions = list(_directions(grid, model.m).items())
        pairs = [(functions[i], directions[i]) for i in range(3)]

        def differences(idx):
            path = _simulate(model, grid, config.seed, idx)
            frame = build_transport(path)
            out = []
            for (_, f), (_, h) in pairs:
                derivative, weighted = pathspace_ibp_sample(f, path, frame, h)
                out.append(derivative - weighted)
            return tuple(out)

        diffs = map_paths(differences, paths, config.chunk_size, config.workers)
        for ((f_name, _), (h_name, _)), diff in zip(pairs, diffs):
            est = estimate(diff, 0.0, z_max=Z_THREE, seed=config.seed)
            outcome.assertions.append(from_estimate(f"{name}: E[d_H {f_name}(xbar {h_name})] - E[f div]", est, z_max=Z_THREE))
    return outcome


def _pullback_pairs(model: ManifoldModel, grid: TimeGrid, config: ExperimentConfig, paths: int):
    h = _directions(grid, model.m)["const"]

    def values(idx):
        path = _simulate(model, grid, config.seed, idx)
        frame = build_transport(path)
        form = HOneForm.from_l2_density(path, frame, smooth_covector)
        projected = form.evaluate(xbar(path, frame, h))
        pulled = pullback_one_form(path, decompose_noise(path), frame, form, h)
        return projected, pulled

    return map_paths(values, paths, config.chunk_size, config.workers), float(h.norm_sq())


def check_pullback_consistency(config: ExperimentConfig) -> CheckOutcome:
    sweep = convergence_sweep(config, "pullback-consistency")
    outcome = CheckOutcome(sweeps=[sweep], notes=[f"dt {d:.3e}: mean gap {e:.3e}" for d, e in zip(sweep.dts, sweep.errors)])
    if sweep.order is not None:
        outcome.assertions.append(assert_at_least("observed order", sweep.order, 0.4))
    else:
        outcome.assertions.append(assert_at_least("sweep resolved", float(sweep.passed), 1.0))
    return outcome


def check_domination(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 100))
    (projected, pulled), h_sq = _pullback_pairs(model, grid, config, config.size("paths", 10_000))
    norm_projected = np.sqrt(np.mean(projected ** 2) / h_sq)
    second = estimate(pulled ** 2 / h_sq, 0.0)
    norm_pulled = np.sqrt(second.mean)
    se = second.se / (2 * norm_pulled) if norm_pulled > 0 else 0.0
    outcome = CheckOutcome(notes=[f"|phi(xbar h)| {norm_projected:.6g}, |I*phi(h)| {norm_pulled:.6g}"])
    outcome.assertions.append(assert_at_most("L2 domination by the pull-back", norm_projected, norm_pulled + Z_THREE * se))
    return outcome


def check_conditional_pullback(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 500))
    h = _directions(grid, model.m)["const"]
    outcome = CheckOutcome()
    if model.kernel_basis(model.base_point).shape[1] == 0:
        path = _simulate(model, grid, config.seed, range(config.size("base_paths", 64)))
        frame = build_transport(path)
        form = HOneForm.from_l2_density(path, frame, smooth_covector)
        pulled = pullback_one_form(path, decompose_noise(path), frame, form, h)
        gap = np.max(np.abs(pulled - form.evaluate(xbar(path, frame, h))))
        outcome.trivial = True
        outcome.notes.append("no redundant noise: the identity holds pathwise")
        outcome.assertions.append(assert_at_most("pull-back against phi(xbar h)", gap, config.tol(1e-10)))
        return outcome
    resamples = config.size("resamples", 512)

    def zscore(i):
        base = _base_path(model, grid, config.seed, i)
        est = conditional_pullback_check(base, smooth_covector, h, resamples, config.seed, base_index=i, z_max=config.z_max)
        return np.array([est.z])

    z = _map_bases(config, config.size("base_paths", 64), zscore).ravel()
    outcome.notes.append(f"max |z| {np.max(np.abs(z)):.3f} over {z.size} base paths")
    outcome.assertions.append(_rate_assertion("conditional pull-back z-test", list(np.abs(z) <= config.z_max), config.pass_rate))
    return outcome


def check_conditional_moment_bound(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 200))
    h = _directions(grid, model.m)["const"]
    resamples = config.size("resamples", 256)

    def ratio(i):
        base = _base_path(model, grid, config.seed, i)
        return np.array([conditional_moment_ratio(base, h, resamples, config.seed, base_index=i)])

    ratios = _map_bases(config, config.size("base_paths", 64), ratio).ravel()
    spread = float(np.max(ratios) / np.min(ratios)) if np.min(ratios) > 0 else np.inf
    outcome = CheckOutcome(trivial=model.kernel_basis(model.base_point).shape[1] == 0)
    outcome.notes.append(f"ratio range [{np.min(ratios):.4g}, {np.max(ratios):.4g}] over {ratios.size} base paths")
    if spread > RATIO_SPREAD_LIMIT:
        logger.warning(f"Conditional moment ratios spread {spread:.3g}x across base paths")
        outcome.notes.append(f"flagged: ratio spread {spread:.3g}x exceeds {RATIO_SPREAD_LIMIT:g}x")
    outcome.assertions += [
        assert_at_least("every conditional moment ratio finite", float(np.all(np.isfinite(ratios))), 1.0),
        assert_at_most("ratio spread across base paths", spread, RATIO_SPREAD_LIMIT),
    ]
    return outcome


# --- wiener ---

def check_chaos_identity(config: ExperimentConfig) -> CheckOutcome:
    grid = TimeGrid(config.horizon, config.size("steps", 2))
    driver = BrownianDriver.sample(grid, 1, config.seed, range(config.size("paths", 100_000)))
    outcome = CheckOutcome()
    cases = [
        ("B_T^2", polynomial_functional([0, 0, 1], config.horizon, "B_T^2"), 1),
        ("B_T^3", polynomial_functional([0, 0, 0, 1], config.horizon, "B_T^3"), 1),
        ("B_T", polynomial_functional([0, 1], config.horizon, "B_T"), 1),
    ]
    for name, f, k in cases:
        result = chaos_remainder_identity_check(f, k, driver=driver, z_max=Z_THREE)
        if result.trivial:
            outcome.notes.append(f"{name}: chaos order at most {k}, both sides vanish")
            outcome.assertions.append(assert_close(f"{name} trivial identity", result.rhs, 0.0, 0.0))
            continue
        outcome.notes.append(f"{name}: |dR|^2 {result.lhs:.17g}, (k+1)|a|^2 + |da|^2 {result.rhs:.17g}")
        outcome.assertions.append(assert_close(f"{name} closed-form identity", result.rhs, result.lhs, config.tol(1e-12) * max(1.0, result.lhs)))
        outcome.assertions.append(from_estimate(f"{name} Monte Carlo left side", result.monte_carlo, z_max=Z_THREE))
    return outcome


def check_chaos_second_moment(config: ExperimentConfig) -> CheckOutcome:
    grid = TimeGrid(config.horizon, config.size("steps", 100))
    paths = config.size("paths", 100_000)
    first = ChaosCoefficient(grid, 1, 1, constant=1.0)
    second = ChaosCoefficient(grid, 2, 1, constant=1.0)

    def integrals(idx):
        driver = BrownianDriver.sample(grid, 1, config.seed, idx)
        ito = ito_integral(driver, lambda k, past: past[-1])
        return iterated_integral(driver, first), iterated_integral(driver, second), ito

    i1, i2, ito = map_paths(integrals, paths, config.chunk_size, config.workers)
    outcome = CheckOutcome(notes=[f"discrete E[I_2^2] = {second.second_moment():.17g} (continuum 2 T^2)"])
    isometry_target = 0.5 * config.horizon ** 2 * (1 - 1 / grid.steps)
    checks = [
        ("E[I_2]", estimate(i2, 0.0, z_max=Z_THREE, seed=config.seed), Z_THREE),
        ("E[I_2^2]", estimate(i2 ** 2, second.second_moment(), z_max=Z_THREE, seed=config.seed), Z_THREE),
        ("E[I_1 I_2]", estimate(i1 * i2, 0.0, z_max=config.z_max, seed=config.seed), config.z_max),
        ("Ito isometry for a_s = B_s", variance_estimate(ito, isometry_target, z_max=Z_THREE, seed=config.seed), Z_THREE),
    ]
    outcome.assertions += [from_estimate(name, est, z_max=z) for name, est, z in checks]
    return outcome


def check_flat_ibp(config: ExperimentConfig) -> CheckOutcome:
    grid = TimeGrid(config.horizon, config.size("steps", 50))
    m = 3
    a = CameronMartinVector.constant(grid, _unit(m, 0))
    directions = _directions(grid, m)
    functionals = {
        "exp_martingale": exp_martingale_functional(a),
        "sine": sine_of_marginal(config.horizon / 2, np.array([1.0, -0.5, 0.25])),
    }
    outcome = CheckOutcome()

    def differences(idx):
        driver = BrownianDriver.sample(grid, m, config.seed, idx)
        out = []
        for F in functionals.values():
            for h in directions.values():
                derivative, weighted = flat_ibp_sample(F, driver, h)
                out.append(derivative - weighted)
        return tuple(out)

    diffs = map_paths(differences, config.size("paths", 100_000), config.chunk_size, config.workers)
    names = [f"{f} along {h}" for f in functionals for h in directions]
    for name, diff in zip(names, diffs):
        est = estimate(diff, 0.0, z_max=Z_THREE, seed=config.seed)
        outcome.assertions.append(from_estimate(f"E[dF(h)] - E[F div] for {name}", est, z_max=Z_THREE))

    driver = BrownianDriver.sample(grid, m, config.seed, range(100))
    F = functionals["exp_martingale"]
    h = directions["const"]
    analytic = F.derivative(driver, h)
    _, discrepancy = malliavin_derivative_fd(F, driver, h, richardson=True)
    plain = malliavin_derivative_fd(F, driver, h)
    outcome.notes.append(f"Richardson discrepancy {np.max(discrepancy):.3e}")
    outcome.assertions.append(assert_at_most("finite-difference derivative of epsilon(a), relative", np.max(np.abs(plain - analytic) / np.abs(analytic)), config.tol(1e-6)))
    return outcome


def check_exp_martingale_moments(config: ExperimentConfig) -> CheckOutcome:
    grid = TimeGrid(config.horizon, config.size("steps", 50))
    driver = BrownianDriver.sample(grid, 2, config.seed, range(config.size("paths", 100_000)))
    outcome = CheckOutcome()
    for energy in [0.25, 0.5, 1.0]:
        a = CameronMartinVector.constant(grid, np.sqrt(energy / config.horizon) * np.array([0.6, 0.8]))
        first, second = exp_martingale_moments(driver, a, z_max=Z_THREE, seed=config.seed)
        outcome.assertions += [
            from_estimate(f"E[epsilon(a)] at |a|^2={energy:g}", first, z_max=Z_THREE),
            from_estimate(f"E[epsilon(a)^2] = exp(|a|^2) at |a|^2={energy:g}", second, z_max=Z_THREE),
        ]
    return outcome


def check_conditional_exp_martingale(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    a = CameronMartinVector.constant(grid, _unit(model.m, 0) / np.sqrt(config.horizon))
    outcome = CheckOutcome()
    if model.kernel_basis(model.base_point).shape[1] == 0:
        path = _simulate(model, grid, config.seed, range(config.size("base_paths", 32)))
        gap = np.max(np.abs(conditional_exp_martingale(path, a) / exp_martingale(path.driver, a) - 1))
        outcome.trivial = True
        outcome.notes.append("no redundant noise: the conditional expectation is the martingale itself")
        outcome.assertions.append(assert_at_most("relative gap to epsilon(a)", gap, config.tol(1e-12)))
        return outcome
    resamples = config.size("resamples", 1024)

    def zscore(i):
        base = _base_path(model, grid, config.seed, i)
        return np.array([conditional_exp_martingale_check(base, a, resamples, config.seed, base_index=i, z_max=config.z_max).z])

    z = _map_bases(config, config.size("base_paths", 32), zscore).ravel()
    outcome.assertions.append(_rate_assertion("conditional exponential z-test", list(np.abs(z) <= config.z_max), config.pass_rate))
    return outcome


# --- harness ---

# Monte Carlo checks re-run by the determinism check at reduced sizes
DETERMINISM_SUITE = [
    "heat-kernel-moment",
    "noise-split",
    "domination",
    "chaos-second-moment",
    "flat-ibp",
    "exp-martingale-moments",
]


def _numeric_dump(report: CheckReport) -> str:
    """Serialized report without the wall time and the config echo"""
    return dumps_17g(report.model_dump(exclude={"wall_ms", "config"}))


def check_determinism(config: ExperimentConfig) -> CheckOutcome:
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 50))
    paths = config.size("paths", 4096)

    def moments(idx):
        path = _simulate(model, grid, config.seed, idx)
        return np.sum(path.terminal() * path.x0, axis=-1)

    first = map_paths(moments, paths, config.chunk_size, 1)
    parallel = map_paths(moments, paths, config.chunk_size, 4)

    reduced = config.model_copy(update={"steps": grid.steps, "paths": paths, "workers": 1, "checks": ""})
    runs = [
        [run_check(reduced, c) for c in DETERMINISM_SUITE],
        [run_check(reduced, c) for c in DETERMINISM_SUITE],
        [run_check(reduced.model_copy(update={"workers": 4}), c) for c in DETERMINISM_SUITE],
    ]
    dumps = [[_numeric_dump(r) for r in run] for run in runs]
    errors = sorted({r.check_id for run in runs for r in run if r.error is not None})
    repeat_diff = [c for c, a, b in zip(DETERMINISM_SUITE, dumps[0], dumps[1]) if a != b]
    worker_diff = [c for c, a, b in zip(DETERMINISM_SUITE, dumps[0], dumps[2]) if a != b]
    outcome = CheckOutcome(notes=[f"re-ran {', '.join(DETERMINISM_SUITE)} at {grid.steps} steps, {paths} paths"])
    if errors:
        outcome.notes.append(f"errors in {', '.join(errors)}")
    if repeat_diff or worker_diff:
        outcome.notes.append(f"differing reports: repeat {repeat_diff}, workers {worker_diff}")
    outcome.assertions += [
        assert_at_least("reduced suite ran without errors", float(not errors), 1.0),
        assert_at_most("repeat run, reports differing", float(len(repeat_diff)), 0.0),
        assert_at_most("1 vs 4 workers, reports differing", float(len(worker_diff)), 0.0),
        assert_at_most("1 vs 4 workers, mean difference", abs(np.mean(first) - np.mean(parallel)), 1e-12),
        assert_at_most("1 vs 4 workers, max sample difference", np.max(np.abs(first - parallel)), 0.0),
    ]
    return outcome


# Core checks first, then the additional diagnostics
CHECKS: Dict[str, Callable[[ExperimentConfig], CheckOutcome]] = {
    "lw-connection": check_lw_connection,
    "ricci-oracle": check_ricci_oracle,
    "heat-kernel-moment": check_heat_kernel_moment,
    "transport-decay": check_transport_decay,
    "bismut-vs-covariant": check_bismut_vs_covariant,
    "intertwine-fd": check_intertwine_fd,
    "intertwine-group": check_intertwine_group,
    "filtering-projection": check_filtering_projection,
    "pathspace-ibp": check_pathspace_ibp,
    "pullback-consistency": check_pullback_consistency,
    "domination": check_domination,
    "chaos-identity": check_chaos_identity,
    "chaos-second-moment": check_chaos_second_moment,
    "conditional-exp-martingale": check_conditional_exp_martingale,
    "exp-martingale-moments": check_exp_martingale_moments,
    "determinism": check_determinism,
    "noise-split": check_noise_split,
    "beta-independence": check_beta_independence,
    "conditional-pullback": check_conditional_pullback,
    "conditional-moment-bound": check_conditional_moment_bound,
    "reconstruct-sweep": check_reconstruct_sweep,
    "flat-ibp": check_flat_ibp,
    "heun-weak-sweep": check_heun_weak_sweep,
}


def run_check(config: ExperimentConfig, check_id: str) -> CheckReport:
    """
    Run one catalog check.

    Exceptions inside the check are logged and turned into a failed report
    carrying the error message.

    Raises:
        UnknownCheck: check_id is not in the catalog
    """
    if check_id not in CHECKS:
        raise UnknownCheck(f"Unknown check: {check_id}")
    logger.info(f"Running check {check_id} (model {config.model}, seed {config.seed})")
    start = time.perf_counter()
    error: Optional[str] = None
    try:
        outcome = CHECKS[check_id](config)
    except Exception as e:
        logger.error(f"Error running check {check_id}: {e}", exc_info=True)
        outcome = CheckOutcome()
        error = f"{type(e).__name__}: {e}"
    wall_ms = (time.perf_counter() - start) * 1000.0
    passed = (
        error is None
        and bool(outcome.assertions)
        and all(a.passed for a in outcome.assertions)
        and all(s.passed for s in outcome.sweeps)
    )
    if outcome.trivial:
        logger.warning(f"Check {check_id} is trivial on model {config.model}")
    report = CheckReport(
        check_id=check_id,
        model=config.model,
        seed=config.seed,
        config=config.echo(),
        assertions=outcome.assertions,
        sweeps=outcome.sweeps,
        wall_ms=wall_ms,
        verdict="pass" if passed else "fail",
        trivial=outcome.trivial,
        notes=outcome.notes,
        error=error
    )
    logger.info(f"Check {check_id}: {report.verdict} ({report.n_pass}/{report.n_assertions} assertions, {wall_ms:.0f} ms)")
    return report


def run_suite(config: ExperimentConfig, check_ids: Optional[List[str]] = None) -> List[CheckReport]:
    ids = check_ids or config.check_ids() or list(CHECKS)
    unknown = [c for c in ids if c not in CHECKS]
    if unknown:
        raise UnknownCheck(f"Unknown checks: {', '.join(unknown)}")
    return [run_check(config, check_id) for check_id in ids]
