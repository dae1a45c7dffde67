"""Declarative gridworld scenarios and their compilation into MDPs.

Cells are ``(x, y)`` with ``0 <= x, y < side``; the state index of a cell is
``y * side + x``. Obstacles are enterable: moving into one always succeeds,
but every action taken from inside an obstacle leaves the agent in place
with probability ``p_stay``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .mdp import Mdp

UP, DOWN, LEFT, RIGHT = range(4)
ACTION_NAMES = ("up", "down", "left", "right")
# y grows downward, so "up" decreases y
MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}

FORMAT_VERSION = 1
DEFAULT_GAMMA = 0.95


class ScenarioError(ValueError):
    """Invalid scenario or malformed scenario file."""


@dataclass(frozen=True)
class GridScenario:
    name: str
    side: int
    start: tuple[int, int]
    goal: tuple[int, int]
    obstacles: frozenset[tuple[int, int]] = frozenset()
    p_stay: float = 0.75
    goal_reward: float = 100.0
    step_reward: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "start", _cell(self.start))
        object.__setattr__(self, "goal", _cell(self.goal))
        object.__setattr__(self, "obstacles", frozenset(_cell(c) for c in self.obstacles))
        object.__setattr__(self, "p_stay", float(self.p_stay))
        object.__setattr__(self, "goal_reward", float(self.goal_reward))
        object.__setattr__(self, "step_reward", float(self.step_reward))

    def violations(self) -> list[str]:
        out = []
        if not isinstance(self.side, int) or self.side < 1:
            return [f"{self.name}: side must be a positive integer, got {self.side!r}"]
        for label, cell in [("start", self.start), ("goal", self.goal)]:
            if not self.in_bounds(cell):
                out.append(f"{self.name}: {label} {cell} outside the {self.side}x{self.side} grid")
        for cell in sorted(self.obstacles):
            if not self.in_bounds(cell):
                out.append(f"{self.name}: obstacle {cell} outside the grid")
        if self.start == self.goal:
            out.append(f"{self.name}: start and goal coincide at {self.start}")
        if self.start in self.obstacles:
            out.append(f"{self.name}: start {self.start} lies inside the obstacles")
        if self.goal in self.obstacles:
            out.append(f"{self.name}: goal {self.goal} lies inside the obstacles")
        if not 0.0 <= self.p_stay <= 1.0:
            out.append(f"{self.name}: p_stay={self.p_stay} not in [0, 1]")
        if not (math.isfinite(self.goal_reward) and math.isfinite(self.step_reward)):
            out.append(f"{self.name}: rewards must be finite")
        return out

    def check(self) -> None:
        problems = self.violations()
        if problems:
            raise ScenarioError("; ".join(problems))

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.side and 0 <= y < self.side

    def index(self, cell) -> int:
        return cell[1] * self.side + cell[0]

    def cell(self, index: int) -> tuple[int, int]:
        return index % self.side, index // self.side

    @property
    def num_states(self) -> int:
        return self.side * self.side

    @property
    def start_index(self) -> int:
        return self.index(self.start)

    @property
    def goal_index(self) -> int:
        return self.index(self.goal)

    def target(self, cell, action: int) -> tuple[int, int]:
        dx, dy = MOVES[action]
        x = min(max(cell[0] + dx, 0), self.side - 1)
        y = min(max(cell[1] + dy, 0), self.side - 1)
        return x, y

    def compatible_with(self, other: "GridScenario") -> bool:
        return _shared(self) == _shared(other)


def _cell(c) -> tuple[int, int]:
    if len(c) != 2:
        raise ScenarioError(f"cell {c!r} is not an (x, y) pair")
    return int(c[0]), int(c[1])


def _shared(s: GridScenario):
    return (s.side, s.start, s.goal, s.p_stay, s.goal_reward, s.step_reward)


def compile_scenario(scenario: GridScenario, gamma: float = DEFAULT_GAMMA) -> Mdp:
    """Dense MDP for a scenario; the goal is terminal (self-loop, zero reward)."""
    scenario.check()
    n = scenario.num_states
    P = np.zeros((n, 4, n))
    R = np.full((n, 4, n), scenario.step_reward)
    goal = scenario.goal_index
    for s in range(n):
        cell = scenario.cell(s)
        for a in range(4):
            if s == goal:
                P[s, a, s] = 1.0
                R[s, a, s] = 0.0
                continue
            nxt = scenario.index(scenario.target(cell, a))
            if cell in scenario.obstacles:
                P[s, a, s] += scenario.p_stay
                P[s, a, nxt] += 1.0 - scenario.p_stay
            else:
                P[s, a, nxt] = 1.0
            R[s, a, goal] = scenario.goal_reward
    return Mdp(P, R, gamma, frozenset({goal}))


def scenario_digest(scenario: GridScenario) -> str:
    """SHA-256 of the compiled dynamics, rewards and terminal set."""
    mdp = compile_scenario(scenario)
    h = hashlib.sha256()
    h.update(np.asarray(mdp.transition.shape, dtype="<i8").tobytes())
    h.update(mdp.transition.astype("<f8").tobytes())
    h.update(mdp.reward.astype("<f8").tobytes())
    h.update(np.asarray(sorted(mdp.terminal_states), dtype="<i8").tobytes())
    return h.hexdigest()


def union(scenarios, name: str) -> GridScenario:
    """Scenario whose obstacles are the union of the given scenarios' obstacles."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError("union of an empty scenario list")
    first = scenarios[0]
    for other in scenarios[1:]:
        if not first.compatible_with(other):
            raise ScenarioError(f"scenarios {first.name!r} and {other.name!r} are incompatible")
    obstacles = frozenset().union(*(s.obstacles for s in scenarios))
    merged = replace(first, name=name, obstacles=obstacles)
    if merged.start in obstacles or merged.goal in obstacles:
        raise ScenarioError(f"union {name!r} covers the start or goal cell")
    return merged


@dataclass(frozen=True)
class ScenarioSet:
    pretrained: tuple[GridScenario, ...] = ()
    deployments: tuple[GridScenario, ...] = ()
    # deployment name -> names of the pretrained scenarios it was built from
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pretrained", tuple(self.pretrained))
        object.__setattr__(self, "deployments", tuple(self.deployments))

    def violations(self) -> list[str]:
        members = self.pretrained + self.deployments
        out = [v for s in members for v in s.violations()]
        names = [s.name for s in members]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            out.append(f"duplicate scenario names: {dupes}")
        if members:
            for s in members[1:]:
                if not members[0].compatible_with(s):
                    out.append(f"{s.name}: side/start/goal/p_stay/rewards differ from {members[0].name}")
        return out

    def get(self, name: str) -> GridScenario:
        for s in self.pretrained + self.deployments:
            if s.name == name:
                return s
        raise KeyError(name)


_SHARED_KEYS = ("side", "start", "goal", "p_stay", "goal_reward", "step_reward")
_DEFAULTS = {"p_stay": 0.75, "goal_reward": 100.0, "step_reward": -1.0}


def load_scenario_file(path) -> ScenarioSet:
    """Parse a TOML scenario file.

    Layout::

        format = 1
        side = 5
        start = [0, 0]
        goal = [4, 4]

        [[pretrained]]
        name = "p1"
        obstacles = [[1, 1]]

        [[deployment]]
        name = "d1"
        union-of = ["p1", "p2"]     # or: obstacles = [[x, y], ...]
    """
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return parse_scenario_doc(doc, source=str(path))


def parse_scenario_doc(doc: dict, source: str = "<scenario>") -> ScenarioSet:
    if doc.get("format") != FORMAT_VERSION:
        raise ScenarioError(f"{source}: field 'format' must be {FORMAT_VERSION}, got {doc.get('format')!r}")
    for key in ("side", "start", "goal"):
        if key not in doc:
            raise ScenarioError(f"{source}: missing required field {key!r}")
    shared = {k: doc.get(k, _DEFAULTS.get(k)) for k in _SHARED_KEYS}
    try:
        shared["start"] = _cell(shared["start"])
        shared["goal"] = _cell(shared["goal"])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{source}: bad start/goal: {exc}") from None

    def obstacles_of(entry, where):
        try:
            return frozenset(_cell(c) for c in entry.get("obstacles", []))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{source}: {where}: field 'obstacles': {exc}") from None

    pretrained = []
    for i, entry in enumerate(doc.get("pretrained", [])):
        where = f"pretrained[{i}]"
        if "name" not in entry:
            raise ScenarioError(f"{source}: {where}: missing field 'name'")
        pretrained.append(GridScenario(name=entry["name"], obstacles=obstacles_of(entry, where), **shared))
    by_name = {s.name: s for s in pretrained}

    deployments, provenance = [], {}
    for i, entry in enumerate(doc.get("deployment", [])):
        where = f"deployment[{i}]"
        if "name" not in entry:
            raise ScenarioError(f"{source}: {where}: missing field 'name'")
        name = entry["name"]
        if "union-of" in entry:
            if "obstacles" in entry:
                raise ScenarioError(f"{source}: {where}: give either 'union-of' or 'obstacles', not both")
            missing = [n for n in entry["union-of"] if n not in by_name]
            if missing:
                raise ScenarioError(f"{source}: {where}: field 'union-of' names unknown scenarios {missing}")
            members = [by_name[n] for n in entry["union-of"]]
            if not members:
                raise ScenarioError(f"{source}: {where}: field 'union-of' is empty")
            obstacles = frozenset().union(*(m.obstacles for m in members))
            provenance[name] = tuple(entry["union-of"])
        else:
            obstacles = obstacles_of(entry, where)
        deployments.append(GridScenario(name=name, obstacles=obstacles, **shared))

    result = ScenarioSet(pretrained, deployments, provenance)
    problems = result.violations()
    if problems:
        raise ScenarioError(f"{source}: " + "; ".join(problems))
    return result


def save_scenario_file(scenarios: ScenarioSet, path) -> None:
    members = scenarios.pretrained + scenarios.deployments
    if not members:
        raise ScenarioError("cannot save an empty scenario set")
    problems = scenarios.violations()
    if problems:
        raise ScenarioError("; ".join(problems))
    ref = members[0]
    lines = [
        f"format = {FORMAT_VERSION}",
        f"side = {ref.side}",
        f"start = [{ref.start[0]}, {ref.start[1]}]",
        f"goal = [{ref.goal[0]}, {ref.goal[1]}]",
        f"p_stay = {ref.p_stay!r}",
        f"goal_reward = {ref.goal_reward!r}",
        f"step_reward = {ref.step_reward!r}",
    ]
    for table, group in (("pretrained", scenarios.pretrained), ("deployment", scenarios.deployments)):
        for s in group:
            lines += ["", f"[[{table}]]", f"name = {_quote(s.name)}"]
            source = scenarios.provenance.get(s.name) if table == "deployment" else None
            if source and _union_matches(scenarios, s, source):
                lines.append("union-of = [" + ", ".join(_quote(n) for n in source) + "]")
            else:
                cells = ", ".join(f"[{x}, {y}]" for x, y in sorted(s.obstacles))
                lines.append(f"obstacles = [{cells}]")
    Path(path).write_text("\n".join(lines) + "\n")


def _union_matches(scenarios, deployment, source):
    try:
        members = [scenarios.get(n) for n in source]
    except KeyError:
        return False
    return frozenset().union(*(m.obstacles for m in members)) == deployment.obstacles


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(scenario: GridScenario, path=()) -> str:
    """ASCII picture: S start, G goal, # obstacle, * path cell."""
    path = set(path)
    rows = []
    for y in range(scenario.side):
        row = []
        for x in range(scenario.side):
            c = (x, y)
            if c == scenario.start:
                row.append("S")
            elif c == scenario.goal:
                row.append("G")
            elif c in scenario.obstacles:
                row.append("#")
            elif scenario.index(c) in path:
                row.append("*")
            else:
                row.append(".")
        rows.append(" ".join(row))
    return "\n".join(rows)


DATA_DIR = Path(__file__).parent / "data"


def shipped_scenarios(name: str) -> Path:
    """Path of a scenario file bundled with the package (``case1`` or ``case2``)."""
    path = DATA_DIR / f"{name}.scn"
    if not path.exists():
        raise FileNotFoundError(path)
    return path
