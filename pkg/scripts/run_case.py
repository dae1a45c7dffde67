"""Pre-train the critic bank and compare AC with MCAC for one scenario set.

    python scripts/run_case.py configs/case1.toml
    python scripts/run_case.py configs/case2.toml --runs 10 --plot
"""

import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from multicritic import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("config")
    parser.add_argument("--runs", type=int)
    parser.add_argument("--out")
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = bench.load_config(args.config)
    if args.runs:
        cfg = replace(cfg, runs=args.runs)
    out = Path(args.out or cfg.output_dir)
    scenarios = bench.scenario_set_for(cfg)

    t0 = time.perf_counter()
    bench.pretrain_critics(scenarios, cfg, out / "bank")
    print(f"pretraining: {time.perf_counter() - t0:.1f}s")
    t0 = time.perf_counter()
    results, report = bench.compare(cfg, scenarios, out / "bank", out, plot=args.plot)
    print(f"comparison: {time.perf_counter() - t0:.1f}s")
    print(bench.summary_markdown(report))
    for d, ok in bench.variance_check(results).items():
        print(f"{d}: final-episode variance MCAC <= AC: {ok}")


if __name__ == "__main__":
    main()
