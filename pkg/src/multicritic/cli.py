"""Command-line front end.

    multicritic validate --scenarios case1
    multicritic pretrain --scenarios case1 --out bank/
    multicritic compare  --scenarios case1 --bank bank/ --out results/
    multicritic deploy   --scenarios case1 --bank bank/ --algorithm MCAC --out runs/
    multicritic report   --results results/

``--scenarios`` accepts a path or the name of a bundled file (``case1``,
``case2``). Settings resolve as flags > ``--config`` file > built-in
defaults; the effective configuration is printed to stderr at startup.
Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .critic_store import CriticFileError
from .gridworld import ScenarioError, compile_scenario, load_scenario_file, shipped_scenarios
from .mdp import validate as validate_mdp

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
OUTPUT_ENV = "MULTICRITIC_OUTPUT_DIR"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scenarios_path(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    try:
        return shipped_scenarios(value)
    except FileNotFoundError:
        raise DataError(f"--scenarios: {value} not found") from None


def _load_scenarios(value: str):
    try:
        return load_scenario_file(_scenarios_path(value))
    except ScenarioError as exc:
        raise DataError(str(exc)) from None


def _config(args) -> bench.ExperimentConfig:
    try:
        cfg = bench.load_config(args.config) if getattr(args, "config", None) else bench.ExperimentConfig()
    except (OSError, ValueError, TypeError) as exc:
        raise DataError(f"--config: {exc}") from None
    overrides = {}
    for flag, name in (("runs", "runs"), ("episodes", "episodes"), ("seed", "base_seed"),
                       ("gamma", "gamma"), ("parallel_runs", "parallel_runs"), ("td_sign", "td_sign"),
                       ("critic_reward_source", "critic_reward_source"),
                       ("pretrain_episodes", "pretrain_episodes"), ("pretrain_seed", "pretrain_seed")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "algorithm", None):
        overrides["algorithms"] = tuple(args.algorithm)
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print("# effective configuration", file=sys.stderr)
    print(cfg.describe(), file=sys.stderr)
    return cfg


def _out_dir(args, cfg=None) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    if cfg is not None:
        return Path(cfg.output_dir)
    raise UsageError("--out is required")


def cmd_validate(args) -> int:
    scenarios = _load_scenarios(args.scenarios)
    problems = []
    for sc in scenarios.pretrained + scenarios.deployments:
        report = validate_mdp(compile_scenario(sc))
        problems += [f"{sc.name}: {v}" for v in report.violations]
    if problems:
        raise DataError("\n".join(problems))
    print(f"OK: {len(scenarios.pretrained)} pre-trained, {len(scenarios.deployments)} deployment scenarios")
    return EXIT_OK


def cmd_pretrain(args) -> int:
    scenarios = _load_scenarios(args.scenarios)
    if args.episodes is not None:
        args.pretrain_episodes, args.episodes = args.episodes, None
    if args.seed is not None:
        args.pretrain_seed, args.seed = args.seed, None
    cfg = _config(args)
    if not scenarios.pretrained:
        raise DataError("no pre-trained scenarios")
    for path in bench.pretrain_critics(scenarios, cfg, _out_dir(args, cfg)):
        print(path)
    return EXIT_OK


def _require_bank(args):
    if not args.bank:
        raise UsageError("--bank is required: run `multicritic pretrain` first")
    if not Path(args.bank).is_dir():
        raise DataError(f"--bank: directory {args.bank} does not exist")


def cmd_compare(args) -> int:
    scenarios = _load_scenarios(args.scenarios)
    _require_bank(args)
    cfg = _config(args)
    cfg = replace(cfg, algorithms=bench.ALGORITHMS)
    out = _out_dir(args, cfg)
    _, report = bench.compare(cfg, scenarios, args.bank, out, plot=args.plot)
    print(bench.summary_markdown(report), end="")
    return EXIT_OK


def cmd_deploy(args) -> int:
    scenarios = _load_scenarios(args.scenarios)
    cfg = _config(args)
    if "MCAC" in cfg.algorithms:
        _require_bank(args)
    out = _out_dir(args, cfg)
    results = bench.run_experiment(cfg, scenarios, args.bank, deployments=args.deployment, out_dir=out)
    bench.emit_reports(results, None, out)
    for d in results.deployments():
        for a in results.algorithms():
            final = results.curves(d, a)[:, -1].mean()
            print(f"{d} {a}: mean final-episode reward {final:.2f}")
    return EXIT_OK


def cmd_report(args) -> int:
    results = bench.load_results(args.results)
    report = bench.speedups(results) if set(results.algorithms()) == set(bench.ALGORITHMS) else None
    bench.emit_reports(results, report, args.out or args.results, plot=args.plot)
    if report is not None:
        print(bench.summary_markdown(report), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multicritic", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, runs=True):
        p.add_argument("--config", help="experiment config file (TOML)")
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or config output_dir)")
        p.add_argument("--gamma", type=float)
        p.add_argument("--td-sign", choices=["prose", "algorithm1"])
        p.add_argument("--episodes", type=int)
        p.add_argument("--seed", type=int)
        if runs:
            p.add_argument("--runs", type=int)
            p.add_argument("--parallel-runs", type=int)
            p.add_argument("--critic-reward-source", choices=["current-env", "per-critic-tables"])

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenarios", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pretrain", help="train AC on pre-trained scenarios and save critics")
    p.add_argument("--scenarios", required=True)
    common(p, runs=False)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("compare", help="run AC and MCAC on every deployment and report speedups")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--bank", help="directory of pre-trained critic artifacts")
    p.add_argument("--plot", action="store_true", help="also write SVG curves")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("deploy", help="run one algorithm on deployment scenarios")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--bank")
    p.add_argument("--algorithm", action="append", choices=list(bench.ALGORITHMS))
    p.add_argument("--deployment", action="append", help="restrict to named deployments")
    common(p)
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("report", help="regenerate summary and curves from raw results")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "deploy" and not args.algorithm:
        args.algorithm = ["MCAC"]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"multicritic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ScenarioError, CriticFileError, bench.ExperimentError) as exc:
        print(f"multicritic: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"multicritic: runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
