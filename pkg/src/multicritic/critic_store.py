"""On-disk critic artifacts and bank assembly.

An artifact is a UTF-8 JSON object::

    {
      "critic-format": 1,
      "scenario_name": "p1",
      "scenario_digest": "<sha256 hex of the compiled scenario>",
      "state_count": 25,
      "gamma": "0x1.e666666666666p-1",
      "values": ["0x0.0p+0", ...],
      "training_episodes": 100,
      "seed": 7,
      "created_at": "2026-01-01T00:00:00+00:00"
    }

Floats (``gamma`` and ``values``) are C99 hex-float strings so a save/load
round trip is bit-exact. Files are written to a temporary sibling and
renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .gridworld import GridScenario, compile_scenario, scenario_digest
from .mcac import CriticBank

CRITIC_FORMAT = 1
SUFFIX = ".critic.json"


class CriticFileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CriticArtifact:
    scenario_name: str
    scenario_digest: str
    state_count: int
    gamma: float
    values: np.ndarray
    training_episodes: int = 0
    seed: int = 0
    created_at: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size != self.state_count:
            raise CriticFileError(
                f"{self.scenario_name}: state_count={self.state_count} but {values.size} values")

    def __eq__(self, other):
        if not isinstance(other, CriticArtifact):
            return NotImplemented
        a, b = asdict(self), asdict(other)
        va, vb = a.pop("values"), b.pop("values")
        return a == b and np.array_equal(va, vb)

    def matches(self, scenario: GridScenario) -> bool:
        return self.scenario_digest == scenario_digest(scenario)


def make_artifact(scenario: GridScenario, values, gamma: float, episodes: int, seed: int) -> CriticArtifact:
    return CriticArtifact(
        scenario_name=scenario.name,
        scenario_digest=scenario_digest(scenario),
        state_count=scenario.num_states,
        gamma=gamma,
        values=values,
        training_episodes=episodes,
        seed=seed,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _to_doc(artifact: CriticArtifact) -> dict:
    return {
        "critic-format": CRITIC_FORMAT,
        "scenario_name": artifact.scenario_name,
        "scenario_digest": artifact.scenario_digest,
        "state_count": artifact.state_count,
        "gamma": float(artifact.gamma).hex(),
        "values": [float(v).hex() for v in artifact.values],
        "training_episodes": artifact.training_episodes,
        "seed": artifact.seed,
        "created_at": artifact.created_at,
    }


def save_critic(artifact: CriticArtifact, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_to_doc(artifact), indent=1) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def load_critic(path) -> CriticArtifact:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CriticFileError(f"{path}: unreadable critic file: {exc}") from None
    if not isinstance(doc, dict):
        raise CriticFileError(f"{path}: expected a JSON object")
    if doc.get("critic-format") != CRITIC_FORMAT:
        raise CriticFileError(f"{path}: critic-format {doc.get('critic-format')!r}, expected {CRITIC_FORMAT}")
    try:
        return CriticArtifact(
            scenario_name=str(doc["scenario_name"]),
            scenario_digest=str(doc["scenario_digest"]),
            state_count=int(doc["state_count"]),
            gamma=float.fromhex(doc["gamma"]),
            values=[float.fromhex(v) for v in doc["values"]],
            training_episodes=int(doc.get("training_episodes", 0)),
            seed=int(doc.get("seed", 0)),
            created_at=str(doc.get("created_at", "")),
        )
    except KeyError as exc:
        raise CriticFileError(f"{path}: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise CriticFileError(f"{path}: {exc}") from None


def critic_path(directory, scenario_name: str) -> Path:
    return Path(directory) / f"{scenario_name}{SUFFIX}"


def assemble_bank(paths, deployment: GridScenario, gamma: float | None = None, scenarios=None,
                  reward_tables: bool = False) -> CriticBank:
    """Load artifacts in the given order into a :class:`CriticBank`.

    ``scenarios`` (name -> GridScenario), when given, is used to verify each
    artifact's digest and, with ``reward_tables=True``, to attach each
    critic's own reward table.
    """
    artifacts = [load_critic(p) for p in paths]
    if not artifacts:
        raise CriticFileError("no critic artifacts given")
    counts = {a.state_count for a in artifacts}
    if len(counts) > 1:
        raise CriticFileError(f"mixed state counts in bank: {sorted(counts)}")
    if deployment.num_states not in counts:
        raise CriticFileError(
            f"critics cover {counts.pop()} states but deployment {deployment.name!r} has {deployment.num_states}")
    gammas = {a.gamma for a in artifacts}
    if len(gammas) > 1:
        raise CriticFileError(f"mixed discount factors in bank: {sorted(gammas)}")
    if gamma is not None and gamma not in gammas:
        raise CriticFileError(f"critics use gamma={gammas.pop()} but the run uses gamma={gamma}")
    tables = None
    if scenarios is not None:
        for a in artifacts:
            if a.scenario_name not in scenarios:
                raise CriticFileError(f"critic {a.scenario_name!r} has no matching scenario")
            if not a.matches(scenarios[a.scenario_name]):
                raise CriticFileError(f"critic {a.scenario_name!r}: digest does not match its scenario")
        if reward_tables:
            tables = [compile_scenario(scenarios[a.scenario_name], a.gamma).reward for a in artifacts]
    elif reward_tables:
        raise CriticFileError("reward tables need the pre-trained scenarios")
    return CriticBank(
        np.stack([a.values for a in artifacts]),
        tuple(a.scenario_name for a in artifacts),
        None if tables is None else np.stack(tables),
    )
