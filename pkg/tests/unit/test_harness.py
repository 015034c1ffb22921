"""Unit tests for configuration, statistics, reports and the check runner"""
import json
import os
import tempfile
import unittest
from unittest.mock import MagicMock, patch

import numpy as np
from pydantic import ValidationError

from harness import cli
from harness.config import ExperimentConfig, load_config
from harness.errors import ConfigError, InvalidSweep, UnknownCheck
from harness.fanout import chunk_indices, map_paths
from harness.metrics import CheckMetrics
from harness.orchestrator import CHECKS, CheckOutcome, run_check, run_suite
from harness.report import ReportStore, dumps_17g, emit_report
from harness.schemas import AssertionResult, CheckReport
from harness.stats import (
    assert_at_least,
    assert_at_most,
    assert_close,
    estimate,
    fit_order,
    from_estimate,
    pass_rate,
)
from harness.sweep import convergence_sweep, summarize_sweep


def _report(check_id="demo", verdict="pass"):
    return CheckReport(
        check_id=check_id,
        model="sphere",
        seed=5,
        config={"steps": 10},
        assertions=[
            AssertionResult(name="first", target=1.0, estimate=1.01, se=0.02, z=0.5, tol=0.06, passed=True),
            AssertionResult(name="second", target=0.0, estimate=0.1, tol=0.05, passed=False),
        ],
        wall_ms=12.5,
        verdict=verdict
    )


class TestConfig(unittest.TestCase):
    def test_defaults(self):
        config = load_config()
        self.assertEqual(config.model, "sphere")
        self.assertEqual(config.horizon, 1.0)
        self.assertIsNone(config.steps)
        self.assertEqual(config.size("steps", 123), 123)
        self.assertEqual(config.tol(2.0), 2.0)

    def test_environment_overrides_explicit_values(self):
        with patch.dict(os.environ, {"PATHSPACE_SEED": "7"}):
            config = load_config(seed=3)
        self.assertEqual(config.seed, 7)

    def test_none_overrides_are_ignored(self):
        config = load_config(steps=None, seed=11)
        self.assertIsNone(config.steps)
        self.assertEqual(config.seed, 11)

    def test_check_ids(self):
        self.assertEqual(load_config(checks="lw-connection, determinism").check_ids(), ["lw-connection", "determinism"])
        self.assertEqual(ExperimentConfig(checks=["a", "b"]).check_ids(), ["a", "b"])
        self.assertEqual(load_config().check_ids(), [])

    def test_invalid_values(self):
        with self.assertRaises(ValidationError):
            load_config(model="torus")
        with self.assertRaises(ValidationError):
            load_config(horizon=-1.0)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/pathspace.env")

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.env")
            with open(path, "w") as fh:
                fh.write("MODEL=group\nSTEPS=20\nPATHS=\n")
            config = load_config(path, seed=9)
        self.assertEqual(config.model, "group")
        self.assertEqual(config.steps, 20)
        self.assertIsNone(config.paths)
        self.assertEqual(config.seed, 9)


class TestStats(unittest.TestCase):
    def test_estimate(self):
        est = estimate(np.array([1.0, 2.0, 3.0]), 2.0)
        self.assertAlmostEqual(est.mean, 2.0)
        self.assertAlmostEqual(est.se, 1 / np.sqrt(3))
        self.assertEqual(est.z, 0.0)
        self.assertTrue(est.passed)
        self.assertIsInstance(est.passed, bool)

    def test_zero_variance(self):
        self.assertTrue(estimate(np.full(5, 1.0), 1.0).passed)
        off = estimate(np.full(5, 1.0), 2.0)
        self.assertEqual(off.z, float("inf"))
        self.assertFalse(off.passed)

    def test_from_estimate_uses_the_bias_band(self):
        est = estimate(np.array([0.9, 1.1, 1.0, 1.0]) + 0.5, 1.0)
        self.assertFalse(from_estimate("shifted", est, z_max=3.0).passed)
        self.assertTrue(from_estimate("shifted", est, z_max=3.0, bias=0.5).passed)

    def test_assertion_helpers(self):
        self.assertTrue(assert_close("close", 1.05, 1.0, 0.1).passed)
        self.assertFalse(assert_close("far", 1.5, 1.0, 0.1).passed)
        self.assertTrue(assert_at_most("small", np.float64(0.5), 1.0).passed)
        self.assertFalse(assert_at_most("nan", float("nan"), 1.0).passed)
        self.assertTrue(assert_at_least("large", 2.0, 1.0).passed)
        self.assertFalse(assert_at_least("inf", float("-inf"), 1.0).passed)

    def test_pass_rate(self):
        self.assertEqual(pass_rate([True, False, True, True]), 0.75)
        self.assertEqual(pass_rate([]), 0.0)

    def test_fit_order(self):
        dts = np.array([0.1, 0.05, 0.025])
        self.assertAlmostEqual(fit_order(dts, 3 * dts ** 2), 2.0, places=10)


class TestSweepSummary(unittest.TestCase):
    def test_exact_sweep(self):
        result = summarize_sweep([0.1, 0.05, 0.025], [0.0, 1e-15, 0.0])
        self.assertTrue(result.exact)
        self.assertTrue(result.passed)
        self.assertIsNone(result.order)

    def test_non_monotone_sweep_fails(self):
        result = summarize_sweep([0.1, 0.05, 0.025], [1e-2, 2e-2, 1e-3], band=(0.5, 2.0))
        self.assertFalse(result.monotone)
        self.assertFalse(result.passed)
        self.assertIsNone(result.order)

    def test_order_band(self):
        dts = [0.1, 0.05, 0.025]
        errors = [0.2, 0.1, 0.05]
        self.assertTrue(summarize_sweep(dts, errors, band=(0.8, 1.5)).passed)
        self.assertFalse(summarize_sweep(dts, errors, band=(1.8, 2.2)).passed)
        self.assertAlmostEqual(summarize_sweep(dts, errors).order, 1.0, places=10)


class TestConvergenceSweep(unittest.TestCase):
    def test_unknown_sweep(self):
        with self.assertRaises(UnknownCheck):
            convergence_sweep(load_config(), "lw-connection")

    def test_too_few_levels(self):
        with self.assertRaises(InvalidSweep):
            convergence_sweep(load_config(), "intertwine-group", levels=2)

    def test_default_weak_sweep_resolves_order_one(self):
        result = convergence_sweep(load_config(), "heun-weak-sweep")
        self.assertAlmostEqual(result.dts[0], 1 / 32)
        self.assertEqual(len(result.errors), 3)
        self.assertTrue(result.monotone, result.errors)
        self.assertTrue(result.passed, f"order {result.order} from errors {result.errors}")

    def test_small_group_sweep(self):
        result = convergence_sweep(load_config(steps=40, seeds=2), "intertwine-group", levels=3)
        self.assertEqual(len(result.dts), 3)
        self.assertAlmostEqual(result.dts[0], 2 * result.dts[1])
        self.assertTrue(all(np.isfinite(e) for e in result.errors))


class TestFanout(unittest.TestCase):
    def test_chunks(self):
        chunks = chunk_indices(10, 4)
        self.assertEqual([len(c) for c in chunks], [4, 4, 2])

    def test_worker_count_does_not_change_results(self):
        serial = map_paths(lambda idx: idx * 2.0, 10, chunk_size=3, workers=1)
        threaded = map_paths(lambda idx: idx * 2.0, 10, chunk_size=3, workers=4)
        np.testing.assert_array_equal(serial, np.arange(10) * 2.0)
        np.testing.assert_array_equal(serial, threaded)

    def test_tuple_results(self):
        first, second = map_paths(lambda idx: (idx, idx ** 2), 7, chunk_size=2, workers=2)
        np.testing.assert_array_equal(first, np.arange(7))
        np.testing.assert_array_equal(second, np.arange(7) ** 2)


class TestReports(unittest.TestCase):
    def test_dumps_17g(self):
        text = dumps_17g({"a": 0.1, "b": float("inf"), "c": True, "d": 3})
        self.assertIn('"a": 0.10000000000000001', text)
        self.assertIn('"b": null', text)
        self.assertIn('"c": true', text)
        self.assertEqual(json.loads(text)["a"], 0.1)

    def test_emit_and_read_back(self):
        report = _report()
        with tempfile.TemporaryDirectory() as tmp:
            store = ReportStore(os.path.join(tmp, "out"))
            written = emit_report(report, store, "json")
            self.assertEqual(len(written), 3)
            self.assertEqual(store.stored_ids(), ["demo"])
            self.assertEqual(store.read_raw("demo"), report)
            with open(store.path_for("demo.csv")) as fh:
                lines = fh.read().splitlines()
            self.assertEqual(lines[0], "name,target,estimate,se,z,tol,pass")
            self.assertTrue(lines[2].startswith("second,0,0.10000000000000001,0,,"))
            self.assertTrue(lines[2].endswith(",false"))
            store.write_summary([report])
            with open(store.path_for("summary.csv")) as fh:
                summary = fh.read().splitlines()
            self.assertEqual(summary[0], "check_id,verdict,n_assertions,n_pass,seed,wall_ms")
            self.assertEqual(summary[1], "demo,pass,2,1,5,12.5")

    def test_unknown_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                emit_report(_report(), ReportStore(tmp), "xml")

    def test_metrics_file(self):
        metrics = CheckMetrics()
        metrics.observe_all([_report(), _report("other", "fail")])
        with tempfile.TemporaryDirectory() as tmp:
            path = metrics.write(tmp)
            with open(path) as fh:
                text = fh.read()
        self.assertIn("pathspace_assertions_total", text)
        self.assertIn('pathspace_check_passed{check_id="other"} 0.0', text)


class TestOrchestrator(unittest.TestCase):
    def test_unknown_check(self):
        with self.assertRaises(UnknownCheck):
            run_check(load_config(), "no-such-check")
        with self.assertRaises(UnknownCheck):
            run_suite(load_config(), ["lw-connection", "no-such-check"])

    def test_small_checks_pass(self):
        cases = [
            ("lw-connection", load_config(paths=50)),
            ("lw-connection", load_config(model="group", paths=20)),
            ("ricci-oracle", load_config(paths=10)),
            ("transport-decay", load_config(steps=100, paths=4)),
            ("determinism", load_config(steps=10, paths=512, chunk_size=64)),
        ]
        for check_id, config in cases:
            report = run_check(config, check_id)
            self.assertEqual(report.verdict, "pass", f"{check_id} on {config.model}: {report.assertions}")
            self.assertIsNone(report.error)
            self.assertGreater(report.wall_ms, 0.0)

    def test_l2_form_checks_on_the_group(self):
        config = load_config(model="group", steps=20, paths=64, base_paths=3)
        for check_id in ["domination", "conditional-pullback"]:
            report = run_check(config, check_id)
            self.assertIsNone(report.error, check_id)
            self.assertEqual(report.verdict, "pass", f"{check_id}: {report.assertions}")
        self.assertTrue(run_check(config, "conditional-pullback").trivial)

    def test_every_check_runs_at_small_sizes(self):
        for model in ["sphere", "group"]:
            config = load_config(
                model=model, steps=16, paths=64, resamples=8, base_paths=2, seeds=2, levels=3, chunk_size=32
            )
            for check_id in CHECKS:
                report = run_check(config, check_id)
                self.assertIsNone(report.error, f"{check_id} on {model}: {report.error}")
                self.assertGreater(report.n_assertions + len(report.sweeps), 0, f"{check_id} on {model}")

    def test_moment_bound_reports_the_ratio_range(self):
        report = run_check(load_config(steps=20, resamples=16, base_paths=4), "conditional-moment-bound")
        self.assertIsNone(report.error)
        names = [a.name for a in report.assertions]
        self.assertIn("ratio spread across base paths", names)
        self.assertTrue(any(n.startswith("ratio range") for n in report.notes))

    def test_pathspace_ibp_uses_the_plain_three_se_band(self):
        report = run_check(load_config(steps=20, paths=256), "pathspace-ibp")
        self.assertIsNone(report.error)
        self.assertEqual(report.n_assertions, 6)
        for a in report.assertions:
            self.assertAlmostEqual(a.tol, 3.0 * a.se, places=14, msg=a.name)

    def test_conditional_checks_default_ensembles(self):
        config = load_config(steps=20)
        with patch("harness.orchestrator.conditional_pullback_check", return_value=MagicMock(z=0.0)) as check:
            report = run_check(config, "conditional-pullback")
        self.assertEqual(report.verdict, "pass")
        self.assertEqual(check.call_count, 64)
        self.assertEqual(check.call_args[0][3], 512)
        with patch("harness.orchestrator.conditional_moment_ratio", return_value=1.5) as ratio:
            report = run_check(config, "conditional-moment-bound")
        self.assertEqual(report.verdict, "pass")
        self.assertEqual(ratio.call_count, 64)
        self.assertEqual(ratio.call_args[0][2], 256)

    def test_moment_ratio_spread_is_flagged(self):
        ratios = iter([0.1] + [2.0] * 3)
        with patch("harness.orchestrator.conditional_moment_ratio", side_effect=lambda *a, **k: next(ratios)):
            report = run_check(load_config(steps=20, base_paths=4), "conditional-moment-bound")
        self.assertEqual(report.verdict, "fail")
        self.assertTrue(any(n.startswith("flagged: ratio spread") for n in report.notes))

    def test_determinism_compares_serialized_reports(self):
        report = run_check(load_config(steps=10, paths=256, chunk_size=64), "determinism")
        self.assertEqual(report.verdict, "pass", f"{report.assertions}")
        names = [a.name for a in report.assertions]
        self.assertIn("repeat run, reports differing", names)
        self.assertIn("1 vs 4 workers, reports differing", names)

    def test_exception_becomes_a_failed_report(self):
        def failing(config):
            raise RuntimeError("boom")

        with patch.dict(CHECKS, {"lw-connection": failing}):
            report = run_check(load_config(), "lw-connection")
        self.assertEqual(report.verdict, "fail")
        self.assertEqual(report.error, "RuntimeError: boom")

    def test_empty_check_fails(self):
        with patch.dict(CHECKS, {"lw-connection": lambda config: CheckOutcome(trivial=True)}):
            report = run_check(load_config(), "lw-connection")
        self.assertEqual(report.verdict, "fail")
        self.assertTrue(report.trivial)

    def test_suite_uses_configured_checks(self):
        reports = run_suite(load_config(checks="ricci-oracle,lw-connection", paths=10))
        self.assertEqual([r.check_id for r in reports], ["ricci-oracle", "lw-connection"])


class TestCli(unittest.TestCase):
    def test_check_writes_reports(self):
        with tempfile.TemporaryDirectory() as tmp:
            code = cli.main(["--out", tmp, "--paths", "20", "check", "ricci-oracle"])
            self.assertEqual(code, 0)
            for name in ["ricci-oracle.json", "ricci-oracle.csv", "summary.csv", "metrics.prom"]:
                self.assertTrue(os.path.exists(os.path.join(tmp, name)), name)
            self.assertEqual(cli.main(["--out", tmp, "--format", "csv", "report"]), 0)

    def test_simulate(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(cli.main(["--out", tmp, "--steps", "10", "--paths", "3", "simulate"]), 0)
            data = np.load(os.path.join(tmp, "paths.npz"))
            self.assertEqual(data["points"].shape, (11, 3, 3))
            self.assertEqual(data["increments"].shape, (10, 3, 3))

    def test_usage_errors(self):
        self.assertEqual(cli.main(["--config", "/nonexistent/run.env", "check", "ricci-oracle"]), 2)
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(cli.main(["--out", tmp, "report"]), 2)
        with self.assertRaises(SystemExit):
            cli.main(["check", "no-such-check"])

    def test_too_few_sweep_levels_is_a_usage_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(cli.main(["--out", tmp, "--levels", "2", "sweep", "heun-weak-sweep"]), 2)
            self.assertFalse(os.path.exists(os.path.join(tmp, "summary.csv")))


if __name__ == '__main__':
    unittest.main()
