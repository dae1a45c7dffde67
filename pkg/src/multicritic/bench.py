"""Experiment harness: pre-train critics, run AC and MCAC over seeded
independent runs, and turn the raw curves into speedup reports.

Output directory layout (all CSV files have a header row)::

    results.csv    deployment,algorithm,run,seed,episode,reward,steps,truncated
    runs.csv       deployment,algorithm,run,seed,runtime_s,total_steps,truncations
    summary.csv    one row per deployment, columns SUMMARY_COLUMNS
    summary.md     the same table, human readable
    curves/<deployment>__<algorithm>.csv
                   episode,mean_reward,var_reward,mean_steps,var_steps

Run ``k`` of every deployment and algorithm uses seed ``base_seed + k``;
pre-training scenario ``i`` uses ``pretrain_seed + i``. Aggregates depend only
on ``results.csv`` and ``runs.csv``, so :func:`load_results` followed by
:func:`speedups` reproduces ``summary.csv`` byte for byte.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ac, mcac
from .critic_store import assemble_bank, critic_path, make_artifact, save_critic
from .gridworld import DEFAULT_GAMMA, ScenarioSet, compile_scenario, load_scenario_file
from .numerics import Schedule, TwoTimescale, default_fast, default_slow

log = logging.getLogger(__name__)

ALGORITHMS = ("AC", "MCAC")
CONFIG_FORMAT = 1
MAX_WORKERS = 32
NOT_REACHED = "not-reached"

SUMMARY_COLUMNS = (
    "deployment",
    "avg_reward_ac", "avg_reward_mcac",
    "avg_steps_ac", "avg_steps_mcac",
    "runtime_ac_s", "runtime_mcac_s", "su1",
    "episodes_ac", "episodes_mcac", "su2",
    "total_su",
)


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_set: str = ""
    algorithms: tuple[str, ...] = ALGORITHMS
    runs: int = 100
    episodes: int = 100
    base_seed: int = 0
    gamma: float = DEFAULT_GAMMA
    fast: Schedule = field(default_factory=default_fast)
    slow: Schedule = field(default_factory=default_slow)
    max_steps_per_episode: int = ac.DEFAULT_MAX_STEPS
    td_sign: str = "prose"
    critic_reward_source: str = "current-env"
    pretrain_episodes: int = 500
    pretrain_exploring_starts: bool = True
    pretrain_seed: int = 1000
    output_dir: str = "results"
    parallel_runs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(a.upper() for a in self.algorithms))
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValueError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {self.algorithms}")
        if self.runs < 1 or self.episodes < 1 or self.pretrain_episodes < 1:
            raise ValueError("runs, episodes and pretrain_episodes must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 1 <= self.parallel_runs <= MAX_WORKERS:
            raise ValueError(f"parallel_runs must lie in [1, {MAX_WORKERS}]")
        problems = TwoTimescale(self.fast, self.slow).check(horizon=10_000)
        if problems:
            raise ValueError("; ".join(problems))

    def seed(self, run: int) -> int:
        return self.base_seed + run

    def ac_config(self, seed: int, episodes: int | None = None, exploring_starts: bool = False) -> ac.AcConfig:
        return ac.AcConfig(
            gamma=self.gamma, value_schedule=self.fast, policy_schedule=self.slow,
            episodes=episodes or self.episodes, max_steps_per_episode=self.max_steps_per_episode,
            seed=seed, td_sign=self.td_sign, exploring_starts=exploring_starts,
        )

    def mcac_config(self, seed: int) -> mcac.McacConfig:
        return mcac.McacConfig(
            gamma=self.gamma, weight_schedule=self.fast, policy_schedule=self.slow,
            episodes=self.episodes, max_steps_per_episode=self.max_steps_per_episode, seed=seed,
            td_sign=self.td_sign, critic_reward_source=self.critic_reward_source, record_weights=False,
        )

    def describe(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {v!r}")
        return "\n".join(lines)


def _schedule_from(doc: dict, default: Schedule, where: str) -> Schedule:
    if "horizon" in doc:
        extra = set(doc) - {"horizon", "exponent", "scale"}
        if extra:
            raise ValueError(f"{where}: unexpected keys {sorted(extra)} next to 'horizon'")
        return Schedule.relative(doc["horizon"], doc.get("exponent", 1.0), doc.get("scale", 1.0))
    return replace(default, **doc)


def config_from_dict(doc: dict, source: str = "<config>") -> ExperimentConfig:
    """Build a config from a parsed TOML document.

    Top-level keys mirror :class:`ExperimentConfig` fields. Schedules live in
    ``[schedules.fast]`` / ``[schedules.slow]`` either as
    ``form/scale/exponent/offset`` or as ``horizon/exponent/scale`` meaning
    ``scale / (1 + t/horizon)**exponent``. ``[pretrain]`` holds
    ``episodes``, ``exploring_starts`` and ``seed``.
    """
    doc = dict(doc)
    version = doc.pop("format", CONFIG_FORMAT)
    if version != CONFIG_FORMAT:
        raise ValueError(f"{source}: config format {version!r}, expected {CONFIG_FORMAT}")
    kwargs = {}
    schedules = doc.pop("schedules", {})
    for name, default in (("fast", default_fast()), ("slow", default_slow())):
        if name in schedules:
            kwargs[name] = _schedule_from(schedules[name], default, f"{source}: schedules.{name}")
    pretrain = doc.pop("pretrain", {})
    for key in ("episodes", "exploring_starts", "seed"):
        if key in pretrain:
            kwargs[f"pretrain_{key}"] = pretrain.pop(key)
    if pretrain:
        raise ValueError(f"{source}: unknown [pretrain] keys {sorted(pretrain)}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"{source}: unknown config keys {unknown}")
    kwargs.update(doc)
    if "algorithms" in kwargs:
        kwargs["algorithms"] = tuple(kwargs["algorithms"])
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return config_from_dict(doc, str(path))


# ---------------------------------------------------------------- pretraining

def pretrain_critics(scenarios: ScenarioSet, cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Train AC on each pre-trained scenario and save its critic."""
    if not scenarios.pretrained:
        raise ExperimentError("no pre-trained scenarios")
    paths = []
    for i, sc in enumerate(scenarios.pretrained):
        seed = cfg.pretrain_seed + i
        run_cfg = cfg.ac_config(seed, cfg.pretrain_episodes, cfg.pretrain_exploring_starts)
        result = ac.train(compile_scenario(sc, cfg.gamma), run_cfg, start=sc.start_index)
        artifact = make_artifact(sc, result.values, cfg.gamma, cfg.pretrain_episodes, seed)
        paths.append(save_critic(artifact, critic_path(out_dir, sc.name)))
        log.info("pretrained %s: %d steps, final episode reward %.1f",
                 sc.name, result.total_steps, result.curves.rewards[-1])
    return paths


def load_bank(scenarios: ScenarioSet, bank_dir, deployment, cfg: ExperimentConfig) -> mcac.CriticBank:
    bank_dir = Path(bank_dir)
    if not bank_dir.is_dir():
        raise ExperimentError(f"critic bank directory {bank_dir} does not exist")
    paths = [critic_path(bank_dir, s.name) for s in scenarios.pretrained]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise ExperimentError(f"missing critic artifacts: {missing}")
    return assemble_bank(
        paths, deployment, gamma=cfg.gamma, scenarios={s.name: s for s in scenarios.pretrained},
        reward_tables=cfg.critic_reward_source == "per-critic-tables",
    )


# ---------------------------------------------------------------- raw results

@dataclass
class RunRecord:
    deployment: str
    algorithm: str
    run: int
    seed: int
    rewards: list[float]
    steps: list[int]
    truncated: list[bool]
    runtime_s: float

    @property
    def total_steps(self) -> int:
        return sum(self.steps)

    @property
    def truncations(self) -> int:
        return sum(self.truncated)


@dataclass
class ExperimentResults:
    runs: list[RunRecord] = field(default_factory=list)

    def deployments(self) -> list[str]:
        return list(dict.fromkeys(r.deployment for r in self.runs))

    def algorithms(self) -> list[str]:
        return [a for a in ALGORITHMS if any(r.algorithm == a for r in self.runs)]

    def select(self, deployment: str, algorithm: str) -> list[RunRecord]:
        return sorted((r for r in self.runs if r.deployment == deployment and r.algorithm == algorithm),
                      key=lambda r: r.run)

    def curves(self, deployment: str, algorithm: str, what: str = "rewards") -> np.ndarray:
        """(runs, episodes) array of per-episode rewards or steps."""
        return np.array([getattr(r, what) for r in self.select(deployment, algorithm)], dtype=np.float64)


def _one_run(job):
    mdp, bank, start, algorithm, run_cfg, deployment, run = job
    t0 = time.perf_counter()
    if algorithm == "AC":
        result = ac.train(mdp, run_cfg, start=start)
    else:
        result = mcac.train_mcac(mdp, bank, run_cfg, start=start)
    elapsed = time.perf_counter() - t0
    c = result.curves
    return RunRecord(deployment, algorithm, run, run_cfg.seed, c.rewards, c.steps, c.truncated, elapsed)


def run_experiment(cfg: ExperimentConfig, scenarios: ScenarioSet, bank_dir=None, deployments=None,
                   out_dir=None) -> ExperimentResults:
    """All runs of every requested algorithm on every deployment.

    Raw results are written to ``out_dir`` (when given) before any
    aggregation happens.
    """
    targets = list(scenarios.deployments)
    if deployments:
        unknown = set(deployments) - {d.name for d in targets}
        if unknown:
            raise ExperimentError(f"unknown deployments {sorted(unknown)}")
        targets = [d for d in targets if d.name in deployments]
    if not targets:
        raise ExperimentError("no deployment scenarios to run")
    if "MCAC" in cfg.algorithms and bank_dir is None:
        raise ExperimentError("MCAC needs a pre-trained critic bank")

    jobs = []
    for d in targets:
        mdp = compile_scenario(d, cfg.gamma)
        bank = load_bank(scenarios, bank_dir, d, cfg) if "MCAC" in cfg.algorithms else None
        for algorithm in cfg.algorithms:
            for run in range(cfg.runs):
                seed = cfg.seed(run)
                run_cfg = cfg.ac_config(seed) if algorithm == "AC" else cfg.mcac_config(seed)
                jobs.append((mdp, bank, d.start_index, algorithm, run_cfg, d.name, run))

    if cfg.parallel_runs > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel_runs) as pool:
            records = list(pool.map(_one_run, jobs, chunksize=4))
    else:
        records = [_one_run(job) for job in jobs]
    results = ExperimentResults(records)
    if out_dir is not None:
        save_results(results, out_dir)
    return results


def save_results(results: ExperimentResults, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["deployment", "algorithm", "run", "seed", "episode", "reward", "steps", "truncated"])
        for r in results.runs:
            for ep, (rew, st, tr) in enumerate(zip(r.rewards, r.steps, r.truncated), start=1):
                w.writerow([r.deployment, r.algorithm, r.run, r.seed, ep, repr(float(rew)), st, int(tr)])
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["deployment", "algorithm", "run", "seed", "runtime_s", "total_steps", "truncations"])
        for r in results.runs:
            w.writerow([r.deployment, r.algorithm, r.run, r.seed, repr(r.runtime_s), r.total_steps, r.truncations])


def load_results(out_dir) -> ExperimentResults:
    out = Path(out_dir)
    for name in ("results.csv", "runs.csv"):
        if not (out / name).exists():
            raise ExperimentError(f"{out / name} not found")
    runtimes = {}
    with open(out / "runs.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            runtimes[(row["deployment"], row["algorithm"], int(row["run"]))] = float(row["runtime_s"])
    records = {}
    with open(out / "results.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["deployment"], row["algorithm"], int(row["run"]))
            if key not in records:
                if key not in runtimes:
                    raise ExperimentError(f"run {key} missing from runs.csv")
                records[key] = RunRecord(*key, int(row["seed"]), [], [], [], runtimes[key])
            rec = records[key]
            if int(row["episode"]) != len(rec.rewards) + 1:
                raise ExperimentError(f"run {key}: episodes out of order at {row['episode']}")
            rec.rewards.append(float(row["reward"]))
            rec.steps.append(int(row["steps"]))
            rec.truncated.append(bool(int(row["truncated"])))
    return ExperimentResults(list(records.values()))


# ---------------------------------------------------------------- metrics

def episodes_to_convergence(avg_ac, avg_mcac):
    """Episode (1-based) where AC's averaged curve peaks, and the first
    episode where MCAC's averaged curve matches that peak (None if never)."""
    avg_ac = np.asarray(avg_ac, dtype=np.float64)
    avg_mcac = np.asarray(avg_mcac, dtype=np.float64)
    if avg_ac.shape != avg_mcac.shape or avg_ac.size == 0:
        raise ValueError("curves must be non-empty and of equal length")
    best = avg_ac.max()
    e_ac = int(np.argmax(avg_ac)) + 1
    hits = np.flatnonzero(avg_mcac >= best)
    e_mcac = int(hits[0]) + 1 if hits.size else None
    return e_ac, e_mcac


def total_speedup(su1, su2):
    if su1 is None or su2 is None:
        return None
    return su1 * su2


@dataclass
class SpeedupRow:
    deployment: str
    avg_reward_ac: float
    avg_reward_mcac: float
    avg_steps_ac: float
    avg_steps_mcac: float
    runtime_ac_s: float
    runtime_mcac_s: float
    episodes_ac: int
    episodes_mcac: int | None
    su1: float = field(init=False)
    su2: float | None = field(init=False)
    total_su: float | None = field(init=False)

    def __post_init__(self):
        self.su1 = self.runtime_ac_s / self.runtime_mcac_s if self.runtime_mcac_s > 0 else math.inf
        self.su2 = None if self.episodes_mcac is None else self.episodes_ac / self.episodes_mcac
        self.total_su = total_speedup(self.su1, self.su2)

    def cells(self) -> list[str]:
        return [
            self.deployment,
            _f(self.avg_reward_ac), _f(self.avg_reward_mcac),
            _f(self.avg_steps_ac), _f(self.avg_steps_mcac),
            _f(self.runtime_ac_s), _f(self.runtime_mcac_s), fmt_speedup(self.su1),
            str(self.episodes_ac), NOT_REACHED if self.episodes_mcac is None else str(self.episodes_mcac),
            fmt_speedup(self.su2), fmt_speedup(self.total_su),
        ]


@dataclass
class SpeedupReport:
    rows: list[SpeedupRow]
    # machine-relative: SU1 depends on the hardware the runs happened on
    su1_machine_relative: bool = True

    @property
    def mean_total_su(self) -> float | None:
        vals = [r.total_su for r in self.rows if r.total_su is not None]
        return float(np.mean(vals)) if vals else None


def _f(x: float) -> str:
    return f"{x:.2f}"


def fmt_speedup(x) -> str:
    return NOT_REACHED if x is None else f"{x:.2f}"


def speedups(results: ExperimentResults) -> SpeedupReport:
    if set(results.algorithms()) != set(ALGORITHMS):
        raise ExperimentError("speedups need both AC and MCAC results")
    rows = []
    for d in results.deployments():
        rew_ac, rew_mc = results.curves(d, "AC"), results.curves(d, "MCAC")
        st_ac, st_mc = results.curves(d, "AC", "steps"), results.curves(d, "MCAC", "steps")
        rt_ac = np.mean([r.runtime_s for r in results.select(d, "AC")])
        rt_mc = np.mean([r.runtime_s for r in results.select(d, "MCAC")])
        e_ac, e_mc = episodes_to_convergence(rew_ac.mean(axis=0), rew_mc.mean(axis=0))
        rows.append(SpeedupRow(
            d, float(rew_ac[:, -1].mean()), float(rew_mc[:, -1].mean()),
            float(st_ac[:, -1].mean()), float(st_mc[:, -1].mean()),
            float(rt_ac), float(rt_mc), e_ac, e_mc,
        ))
    return SpeedupReport(rows)


def curve_table(results: ExperimentResults, deployment: str, algorithm: str) -> np.ndarray:
    """(episodes, 5): episode, mean/var reward, mean/var steps across runs."""
    rew = results.curves(deployment, algorithm)
    st = results.curves(deployment, algorithm, "steps")
    episodes = np.arange(1, rew.shape[1] + 1)
    return np.column_stack([episodes, rew.mean(0), rew.var(0), st.mean(0), st.var(0)])


def variance_check(results: ExperimentResults) -> dict[str, bool]:
    """Per deployment: is MCAC's final-episode reward variance <= AC's?"""
    out = {}
    for d in results.deployments():
        out[d] = bool(results.curves(d, "MCAC")[:, -1].var() <= results.curves(d, "AC")[:, -1].var())
    return out


def emit_reports(results: ExperimentResults, report: SpeedupReport | None, out_dir, plot: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if report is not None:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for row in report.rows:
                w.writerow(row.cells())
        written.append(out / "summary.csv")
        (out / "summary.md").write_text(summary_markdown(report))
        written.append(out / "summary.md")
    curves_dir = out / "curves"
    curves_dir.mkdir(exist_ok=True)
    for d in results.deployments():
        for algorithm in results.algorithms():
            path = curves_dir / f"{d}__{algorithm}.csv"
            table = curve_table(results, d, algorithm)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["episode", "mean_reward", "var_reward", "mean_steps", "var_steps"])
                for ep, *vals in table:
                    w.writerow([int(ep)] + [repr(float(v)) for v in vals])
            written.append(path)
    if plot:
        written += plot_curves(results, out)
    return written


def summary_markdown(report: SpeedupReport) -> str:
    head = ["Deployment", "Reward AC", "Reward MCAC", "Steps AC", "Steps MCAC", "Runtime AC (s)",
            "Runtime MCAC (s)", "SU1", "Episodes AC", "Episodes MCAC", "SU2", "Total SU"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in report.rows:
        lines.append("| " + " | ".join(row.cells()) + " |")
    mean = report.mean_total_su
    lines += ["", f"Mean total SU: {fmt_speedup(mean)}",
              "SU1 is a wall-clock ratio and depends on the machine; SU2 does not."]
    return "\n".join(lines) + "\n"


def plot_curves(results: ExperimentResults, out_dir) -> list[Path]:
    """One SVG per deployment: mean reward and steps with +-1 std bands."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    for d in results.deployments():
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        for algorithm in results.algorithms():
            t = curve_table(results, d, algorithm)
            for ax, mean, var in ((axes[0], t[:, 1], t[:, 2]), (axes[1], t[:, 3], t[:, 4])):
                ax.plot(t[:, 0], mean, label=algorithm)
                sd = np.sqrt(var)
                ax.fill_between(t[:, 0], mean - sd, mean + sd, alpha=0.25)
        axes[0].set_title(f"{d}: average total reward")
        axes[1].set_title(f"{d}: average number of steps")
        for ax in axes:
            ax.set_xlabel("episode")
            ax.legend()
        path = Path(out_dir) / f"{d}.svg"
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def compare(cfg: ExperimentConfig, scenarios: ScenarioSet, bank_dir, out_dir, plot: bool = False):
    results = run_experiment(cfg, scenarios, bank_dir, out_dir=out_dir)
    report = speedups(results)
    emit_reports(results, report, out_dir, plot=plot)
    for d, ok in variance_check(results).items():
        if not ok:
            log.warning("%s: MCAC final-episode variance exceeds AC's", d)
    return results, report


def scenario_set_for(cfg: ExperimentConfig) -> ScenarioSet:
    if not cfg.scenario_set:
        raise ExperimentError("no scenario_set configured")
    return load_scenario_file(cfg.scenario_set)
