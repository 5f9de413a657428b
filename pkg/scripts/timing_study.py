"""Prediction latency against training size for all four regressors.

    python scripts/timing_study.py --sizes 3000,6000,12000 --out timing.json
"""

import argparse
import logging
from pathlib import Path

from multisparse.bench import BenchConfig, run_bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="3000,6000,12000")
    ap.add_argument("--methods", default="gp,spgp,lgp,msgp")
    ap.add_argument("--queries", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = BenchConfig(sizes=tuple(int(s) for s in args.sizes.split(",")),
                      methods=tuple(args.methods.split(",")), n_queries=args.queries,
                      seed=args.seed)
    report = run_bench(cfg)
    print(report.table())
    for m in cfg.methods:
        lat = [c.cached_ms for c in report.cells if c.method == m and c.cached_ms is not None]
        if len(lat) > 1:
            print(f"{m}: cached latency spread {max(lat) / min(lat):.2f}x across sizes")
    if args.out:
        Path(args.out).write_text(report.to_json())


if __name__ == "__main__":
    main()
