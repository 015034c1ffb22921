"""Command-line entrypoint: simulate, check, suite, sweep and report"""
import argparse
import logging
import os
import sys
import time
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from geometry.models import build_model
from harness.config import ExperimentConfig, load_config
from harness.errors import ConfigError, InvalidSweep, UnknownCheck
from harness.metrics import CheckMetrics
from harness.orchestrator import CHECKS, run_check, run_suite
from harness.report import ReportStore, emit_report
from harness.schemas import CheckReport
from harness.stats import assert_at_least
from harness.sweep import SWEEPS, convergence_sweep
from sde_engine.grid import BrownianDriver, TimeGrid
from sde_engine.integrator import integrate

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathspace", description="Numerical checks of Malliavin calculus on path spaces")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--model", choices=["sphere", "group"])
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--paths", type=int)
    parser.add_argument("--resamples", type=int)
    parser.add_argument("--base-paths", type=int)
    parser.add_argument("--seeds", type=int)
    parser.add_argument("--levels", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", choices=["json", "csv"])
    parser.add_argument("--tol-scale", type=float)
    parser.add_argument("--workers", type=int)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="Integrate paths and save them to paths.npz")
    check = sub.add_parser("check", help="Run one check")
    check.add_argument("check_id", choices=sorted(CHECKS))
    suite = sub.add_parser("suite", help="Run the whole catalog (or --checks)")
    suite.add_argument("--checks", help="Comma-separated check ids")
    sweep = sub.add_parser("sweep", help="Run a convergence sweep")
    sweep.add_argument("check_id", choices=sorted(SWEEPS))
    report = sub.add_parser("report", help="Re-emit stored reports in the chosen format")
    report.add_argument("--checks", help="Comma-separated check ids (default: all stored)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(
        args.config,
        model=args.model,
        horizon=args.horizon,
        steps=args.steps,
        paths=args.paths,
        resamples=args.resamples,
        base_paths=args.base_paths,
        seeds=args.seeds,
        levels=args.levels,
        seed=args.seed,
        out=args.out,
        format=args.format,
        tol_scale=args.tol_scale,
        workers=args.workers,
        checks=getattr(args, "checks", None)
    )


def simulate(config: ExperimentConfig) -> str:
    """Integrate config.paths paths and save points and increments"""
    model = build_model(config.model)
    grid = TimeGrid(config.horizon, config.size("steps", 1000))
    n_paths = config.size("paths", 16)
    driver = BrownianDriver.sample(grid, model.m, config.seed, range(n_paths))
    path = integrate(model, None, driver)
    os.makedirs(config.out, exist_ok=True)
    target = os.path.join(config.out, "paths.npz")
    np.savez(
        target,
        points=path.points,
        increments=driver.increments,
        times=grid.times,
        path_indices=driver.path_indices,
        seed=config.seed,
        model=config.model
    )
    logger.info(f"Saved {n_paths} paths of {grid.steps} steps to {target}")
    return target


def sweep_report(config: ExperimentConfig, check_id: str) -> CheckReport:
    start = time.perf_counter()
    sweep = convergence_sweep(config, check_id)
    return CheckReport(
        check_id=f"{check_id}-sweep",
        model=config.model,
        seed=config.seed,
        config=config.echo(),
        assertions=[assert_at_least("sweep passed", float(sweep.passed), 1.0)],
        sweeps=[sweep],
        wall_ms=(time.perf_counter() - start) * 1000.0,
        verdict="pass" if sweep.passed else "fail"
    )


def finish(reports: List[CheckReport], config: ExperimentConfig) -> int:
    """Write every report plus summary.csv and metrics.prom; exit code by verdicts"""
    store = ReportStore(config.out)
    for report in reports:
        emit_report(report, store, config.format)
    store.write_summary(reports)
    metrics = CheckMetrics()
    metrics.observe_all(reports)
    metrics.write(config.out)
    failed = [r.check_id for r in reports if not r.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(reports)} checks failed: {', '.join(failed)}")
        return EXIT_FAIL
    logger.info(f"All {len(reports)} checks passed")
    return EXIT_PASS


def reemit(config: ExperimentConfig, check_ids: Optional[List[str]]) -> int:
    store = ReportStore(config.out)
    ids = check_ids or store.stored_ids()
    if not ids:
        raise ConfigError(f"No stored reports in {config.out}")
    reports = [store.read_raw(c) for c in ids]
    for report in reports:
        emit_report(report, store, config.format)
    store.write_summary(reports)
    return EXIT_PASS


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    try:
        config = config_from_args(args)
        if args.command == "simulate":
            simulate(config)
            return EXIT_PASS
        if args.command == "check":
            return finish([run_check(config, args.check_id)], config)
        if args.command == "suite":
            return finish(run_suite(config), config)
        if args.command == "sweep":
            return finish([sweep_report(config, args.check_id)], config)
        return reemit(config, config.check_ids())
    except (ValidationError, ConfigError, UnknownCheck, InvalidSweep) as e:
        logger.error(f"Invalid invocation: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}", exc_info=True)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
