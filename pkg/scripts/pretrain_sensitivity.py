"""How much does the Case 1 outcome depend on the pre-training seed?

Repeats pre-training with several seeds and prints, per deployment, the
episode-100 reward gap (MCAC - AC) and SU2.
"""

import argparse
import tempfile
from dataclasses import replace
from pathlib import Path

from multicritic import bench
from multicritic.gridworld import load_scenario_file, shipped_scenarios


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[1000, 1, 2, 3])
    parser.add_argument("--runs", type=int, default=100)
    args = parser.parse_args()

    scenarios = load_scenario_file(shipped_scenarios("case1"))
    base = bench.ExperimentConfig(runs=args.runs)
    print("pretrain_seed deployment gap su2")
    for seed in args.seeds:
        cfg = replace(base, pretrain_seed=seed)
        with tempfile.TemporaryDirectory() as tmp:
            bench.pretrain_critics(scenarios, cfg, Path(tmp))
            report = bench.speedups(bench.run_experiment(cfg, scenarios, tmp))
        for row in report.rows:
            gap = row.avg_reward_mcac - row.avg_reward_ac
            print(f"{seed} {row.deployment} {gap:+.2f} {bench.fmt_speedup(row.su2)}")


if __name__ == "__main__":
    main()
