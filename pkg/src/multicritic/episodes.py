"""Episode loop shared by the baseline actor-critic and MCAC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp, _pick, _search


@dataclass
class EpisodeCurves:
    rewards: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    truncated: list[bool] = field(default_factory=list)

    def __len__(self):
        return len(self.rewards)

    @property
    def truncations(self) -> int:
        return sum(self.truncated)


def run_episodes(mdp: Mdp, policy, update, *, episodes, max_steps, rng, start=0,
                 exploring_starts=False, on_step=None):
    """Drive ``episodes`` episodes, calling ``update(t, s, a, s2, r)`` each step.

    ``policy`` is the live list-of-lists table mutated by ``update``. Returns
    the curves and the total number of steps taken. The loop inlines
    :func:`~multicritic.mdp.draw_action` and :func:`~multicritic.mdp.sample_next`
    and keeps their one-uniform-per-call contract.
    """
    sampler = mdp._sampler
    terminal = mdp.terminal_states
    starts = [s for s in range(mdp.num_states) if s not in terminal]
    curves = EpisodeCurves()
    t = 0
    for _ in range(episodes):
        s = starts[int(rng.integers(len(starts)))] if exploring_starts else start
        total = 0.0
        n = 0
        done = s in terminal
        while not done and n < max_steps:
            a = _pick(policy[s], rng.random())
            cum, nexts, rewards = sampler[s][a]
            i = _search(cum, rng.random())
            s2, r = nexts[i], rewards[i]
            update(t, s, a, s2, r)
            if on_step is not None:
                on_step(t, s, a, s2, r)
            total += r
            n += 1
            t += 1
            s = s2
            done = s in terminal
        curves.rewards.append(total)
        curves.steps.append(n)
        curves.truncated.append(not done)
    return curves, t


def uniform_policy(num_states: int, num_actions: int) -> list[list[float]]:
    return [[1.0 / num_actions] * num_actions for _ in range(num_states)]


def as_array(table) -> np.ndarray:
    return np.array(table, dtype=np.float64)
