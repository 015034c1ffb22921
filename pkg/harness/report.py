"""Local report store: JSON, CSV and summary files for check reports"""
import csv
import json
import logging
import math
import os
import re
from typing import Any, Dict, List

from harness.schemas import CheckReport, SummaryRow

logger = logging.getLogger(__name__)

ASSERTION_FIELDS = ["name", "target", "estimate", "se", "z", "tol", "pass"]
SUMMARY_FIELDS = ["check_id", "verdict", "n_assertions", "n_pass", "seed", "wall_ms"]

_FLOAT_TAG = "__f__"
_TAGGED = re.compile(r'"' + _FLOAT_TAG + r'([^"]*)"')


def format_float(x: float) -> str:
    return "%.17g" % x


def _tag_floats(obj: Any) -> Any:
    # floats become tagged strings so the encoder cannot reformat them
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return None
        return _FLOAT_TAG + format_float(obj)
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    return obj


def dumps_17g(obj: Any) -> str:
    """JSON with every float written as %.17g and non-finite floats as null"""
    text = json.dumps(_tag_floats(obj), indent=2, sort_keys=True)
    return _TAGGED.sub(lambda m: m.group(1), text)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "" if not math.isfinite(value) else format_float(value)
    return str(value)


class ReportStore:
    """Wrapper around an output directory holding check reports"""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self._ensure_dir()

    def _ensure_dir(self):
        """Create the output directory if it doesn't exist"""
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            logger.error(f"Failed to create output directory: {e}")
            raise OSError(f"Cannot create output directory {self.out_dir}: {e}") from e

    def path_for(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _write_text(self, name: str, text: str) -> str:
        path = self.path_for(name)
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"Failed to write {path}: {e}") from e
        return path

    def _write_rows(self, name: str, fields: List[str], rows: List[Dict[str, Any]]) -> str:
        path = self.path_for(name)
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _cell(row.get(k)) for k in fields})
        except OSError as e:
            raise OSError(f"Failed to write {path}: {e}") from e
        return path

    def write_json(self, report: CheckReport) -> str:
        return self._write_text(f"{report.check_id}.json", dumps_17g(report.model_dump()) + "\n")

    def write_csv(self, report: CheckReport) -> str:
        rows = []
        for a in report.assertions:
            row = a.model_dump()
            row["pass"] = row.pop("passed")
            rows.append(row)
        return self._write_rows(f"{report.check_id}.csv", ASSERTION_FIELDS, rows)

    def write_raw(self, report: CheckReport) -> str:
        """Lossless dump; non-finite floats stay as NaN/Infinity tokens"""
        text = json.dumps(report.model_dump(), indent=2, sort_keys=True)
        return self._write_text(f"{report.check_id}.raw.json", text + "\n")

    def read_raw(self, check_id: str) -> CheckReport:
        path = self.path_for(f"{check_id}.raw.json")
        try:
            with open(path) as fh:
                return CheckReport.model_validate(json.load(fh))
        except OSError as e:
            raise OSError(f"Failed to read {path}: {e}") from e

    def stored_ids(self) -> List[str]:
        suffix = ".raw.json"
        return sorted(f[: -len(suffix)] for f in os.listdir(self.out_dir) if f.endswith(suffix))

    def write_summary(self, reports: List[CheckReport]) -> str:
        rows = [
            SummaryRow(
                check_id=r.check_id,
                verdict=r.verdict,
                n_assertions=r.n_assertions,
                n_pass=r.n_pass,
                seed=r.seed,
                wall_ms=r.wall_ms
            ).model_dump()
            for r in reports
        ]
        return self._write_rows("summary.csv", SUMMARY_FIELDS, rows)


def emit_report(report: CheckReport, store: ReportStore, fmt: str = "json") -> List[str]:
    """
    Write one report: <id>.json or <id>.csv by format, always the assertion
    CSV and the raw dump used for re-emission.
    """
    written = [store.write_raw(report), store.write_csv(report)]
    if fmt == "json":
        written.append(store.write_json(report))
    elif fmt != "csv":
        raise ValueError(f"Unknown report format: {fmt}")
    logger.info(f"Report for {report.check_id} written to {store.out_dir} ({report.verdict})")
    return written
