"""Baseline tabular actor-critic with a projected, directly parameterised policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .episodes import EpisodeCurves, as_array, run_episodes, uniform_policy
from .mdp import Mdp, Transition
from .numerics import Schedule, TwoTimescale, default_fast, default_slow, project_simplex_list

TD_SIGNS = ("prose", "algorithm1")
DEFAULT_MAX_STEPS = 10_000


@dataclass(frozen=True)
class AcConfig:
    gamma: float | None = None  # None: use the MDP's discount
    value_schedule: Schedule = field(default_factory=default_fast)
    policy_schedule: Schedule = field(default_factory=default_slow)
    episodes: int = 100
    max_steps_per_episode: int = DEFAULT_MAX_STEPS
    seed: int = 0
    td_sign: str = "prose"
    exploring_starts: bool = False

    def __post_init__(self):
        if self.td_sign not in TD_SIGNS:
            raise ValueError(f"td_sign must be one of {TD_SIGNS}")
        if self.episodes < 1 or self.max_steps_per_episode < 1:
            raise ValueError("episodes and max_steps_per_episode must be positive")
        problems = TwoTimescale(self.value_schedule, self.policy_schedule).check(horizon=10_000)
        if problems:
            raise ValueError("policy schedule must be slower than the value schedule: " + "; ".join(problems))


@dataclass
class AcResult:
    policy: np.ndarray
    values: np.ndarray
    curves: EpisodeCurves
    total_steps: int


def policy_signal(v_s: float, v_next: float, r: float, gamma: float, td_sign: str = "prose") -> float:
    """Quantity added (scaled by rate and sqrt(pi)) to the chosen action's probability.

    ``prose`` is the classical TD error ``r + gamma V(s') - V(s)``; ``algorithm1``
    is ``-(V(s) - gamma V(s') + r)``, i.e. the reward enters with the other sign.
    """
    if td_sign == "prose":
        return r + gamma * v_next - v_s
    return -(v_s - gamma * v_next + r)


def critic_step(values: np.ndarray, tr: Transition, rate: float, gamma: float) -> np.ndarray:
    s, _, s2, r = tr
    out = np.array(values, dtype=np.float64)
    out[s] = values[s] + rate * (gamma * values[s2] - values[s] + r)
    return out


def _bump_row(row, a, rate, signal):
    p = row[a]
    if p <= 0.0 or signal == 0.0:
        return row
    updated = list(row)
    updated[a] = p + rate * math.sqrt(p) * signal
    return project_simplex_list(updated)


def policy_step(policy: np.ndarray, values: np.ndarray, tr: Transition, rate: float, gamma: float,
                td_sign: str = "prose") -> np.ndarray:
    s, a, s2, r = tr
    signal = policy_signal(values[s], values[s2], r, gamma, td_sign)
    out = np.array(policy, dtype=np.float64)
    out[s] = _bump_row(out[s].tolist(), a, rate, signal)
    return out


def train(mdp: Mdp, cfg: AcConfig = AcConfig(), start: int = 0, on_step=None) -> AcResult:
    """Run the baseline actor-critic for ``cfg.episodes`` episodes.

    Each step updates the critic entry of the visited state and the policy
    row of that state, both from the same pre-update TD error.
    """
    gamma = mdp.gamma if cfg.gamma is None else cfg.gamma
    rng = np.random.default_rng(cfg.seed)
    V = [0.0] * mdp.num_states
    pi = uniform_policy(mdp.num_states, mdp.num_actions)
    value_rate = cfg.value_schedule.rate
    policy_rate = cfg.policy_schedule.rate
    sign = cfg.td_sign

    def update(t, s, a, s2, r):
        v_s, v_next = V[s], V[s2]
        V[s] = v_s + value_rate(t) * (gamma * v_next - v_s + r)
        pi[s] = _bump_row(pi[s], a, policy_rate(t), policy_signal(v_s, v_next, r, gamma, sign))

    curves, steps = run_episodes(
        mdp, pi, update, episodes=cfg.episodes, max_steps=cfg.max_steps_per_episode, rng=rng,
        start=start, exploring_starts=cfg.exploring_starts,
        on_step=None if on_step is None else (lambda *tr: on_step(*tr, pi=pi, values=V)),
    )
    return AcResult(as_array(pi), np.array(V), curves, steps)
