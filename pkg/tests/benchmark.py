"""Benchmark script for the check catalog"""
import csv
import sys
import time

from harness.config import load_config
from harness.orchestrator import run_check

# Reduced sizes so the whole catalog finishes in minutes
BENCHMARK_SIZES = {
    "lw-connection": {"paths": 200},
    "ricci-oracle": {"paths": 20},
    "heat-kernel-moment": {"steps": 100, "paths": 5000},
    "transport-decay": {"steps": 200, "paths": 8},
    "bismut-vs-covariant": {"steps": 800, "seeds": 2},
    "noise-split": {"steps": 50, "paths": 2000},
    "determinism": {"steps": 20, "paths": 1024},
    "exp-martingale-moments": {"paths": 20000},
    "conditional-moment-bound": {"steps": 100, "base_paths": 8, "resamples": 64},
    "heun-weak-sweep": {"paths": 10000},
    "chaos-identity": {},
    "chaos-second-moment": {"steps": 50, "paths": 5000},
}


def benchmark_checks(model: str = "sphere", output_csv: str = "benchmark_results.csv"):
    """
    Time each benchmarked check once and write a CSV report

    Args:
        model: Manifold model to run on
        output_csv: Output CSV file path
    """
    results = []
    for check_id, sizes in BENCHMARK_SIZES.items():
        print(f"Running: {check_id}")
        config = load_config(model=model, **sizes)
        start_time = time.time()
        report = run_check(config, check_id)
        elapsed_time = time.time() - start_time

        results.append({
            "check_id": check_id,
            "model": model,
            "verdict": report.verdict,
            "n_assertions": report.n_assertions,
            "n_pass": report.n_pass,
            "trivial": report.trivial,
            "time_seconds": elapsed_time
        })

        print(f"  {report.verdict} in {elapsed_time:.2f}s")

    with open(output_csv, 'w', newline='') as f:
        if results:
            writer = csv.DictWriter(f, fieldnames=results[0].keys())
            writer.writeheader()
            writer.writerows(results)

    print(f"\nBenchmark complete. Results written to {output_csv}")
    if results:
        total = sum(r["time_seconds"] for r in results)
        print(f"Total time: {total:.2f}s over {len(results)} checks")


if __name__ == "__main__":
    model = sys.argv[1] if len(sys.argv) > 1 else "sphere"
    benchmark_checks(model)
