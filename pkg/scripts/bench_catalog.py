"""Time the filter battery on the synthetic 265-table / 68213-row corpus.

    python3 scripts/bench_catalog.py [--repeat N] [--oracle-fraction F]
"""
import argparse
import statistics
import sys

from tcgx.bench import BATTERY, BUDGET_SECONDS, BenchSpec, bench_catalog


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--oracle-fraction", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=BenchSpec().seed)
    args = ap.parse_args(argv)
    spec = BenchSpec(seed=args.seed)
    runs = [bench_catalog(spec, BATTERY, args.oracle_fraction if i == 0 else 0) for i in range(args.repeat)]
    print(runs[0].text(), end="")
    times = [r.battery_seconds for r in runs]
    print(f"battery over {len(times)} runs: median {statistics.median(times):.4f} s, max {max(times):.4f} s")
    ok = max(times) < BUDGET_SECONDS and runs[0].mismatches == 0
    print("within budget" if ok else "OVER BUDGET OR MISMATCHED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
