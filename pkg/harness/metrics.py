"""Prometheus metrics for check runs"""
import logging
import os
from typing import List

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

from harness.schemas import CheckReport

logger = logging.getLogger(__name__)


class CheckMetrics:
    """Per-run registry of assertion counters, wall-time histogram and verdict gauges"""

    def __init__(self):
        self.registry = CollectorRegistry()
        self.assertions = Counter(
            "pathspace_assertions",
            "Assertions evaluated",
            ["check_id", "outcome"],
            registry=self.registry
        )
        self.wall_seconds = Histogram(
            "pathspace_check_seconds",
            "Wall time per check",
            ["check_id"],
            buckets=(0.1, 1, 5, 30, 60, 120, 300, 900),
            registry=self.registry
        )
        self.verdict = Gauge(
            "pathspace_check_passed",
            "1 when the check passed, 0 otherwise",
            ["check_id"],
            registry=self.registry
        )

    def observe(self, report: CheckReport):
        self.assertions.labels(report.check_id, "pass").inc(report.n_pass)
        self.assertions.labels(report.check_id, "fail").inc(report.n_assertions - report.n_pass)
        self.wall_seconds.labels(report.check_id).observe(report.wall_ms / 1000.0)
        self.verdict.labels(report.check_id).set(1.0 if report.passed else 0.0)

    def observe_all(self, reports: List[CheckReport]):
        for report in reports:
            self.observe(report)

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "metrics.prom")
        try:
            write_to_textfile(path, self.registry)
        except OSError as e:
            raise OSError(f"Failed to write {path}: {e}") from e
        logger.debug(f"Metrics written to {path}")
        return path
