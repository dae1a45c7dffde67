"""Finite MDPs, validation and seeded sampling.

Every random quantity in the package is drawn through :func:`sample_next`
and :func:`draw_action`, each of which consumes exactly one uniform variate
from the run's generator. Keeping that consumption fixed means a change in
one algorithm never shifts the random stream seen by another.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

ROW_TOL = 1e-12
POLICY_TOL = 1e-9


class Transition(NamedTuple):
    state: int
    action: int
    next_state: int
    reward: float


@dataclass(frozen=True, eq=False)
class Mdp:
    """Dense tabular MDP.

    ``transition[s, a, s']`` is P(s'|s,a) and ``reward[s, a, s']`` is
    r(s,a,s'). Arrays are made read-only on construction so one instance
    can be shared by any number of concurrent runs.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal_states: frozenset[int] = frozenset()
    _sampler: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        transition = np.array(self.transition, dtype=np.float64)
        reward = np.array(self.reward, dtype=np.float64)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {transition.shape}")
        if reward.shape != transition.shape:
            raise ValueError(f"reward shape {reward.shape} != transition shape {transition.shape}")
        transition.setflags(write=False)
        reward.setflags(write=False)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "terminal_states", frozenset(int(s) for s in self.terminal_states))
        object.__setattr__(self, "_sampler", _build_sampler(transition, reward))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def is_terminal(self, s: int) -> bool:
        return s in self.terminal_states


def _build_sampler(transition, reward):
    # per (s, a): (cumulative probs, next states, rewards) over the support only
    table = []
    for s in range(transition.shape[0]):
        row = []
        for a in range(transition.shape[1]):
            support = np.flatnonzero(transition[s, a] > 0.0)
            cum = np.cumsum(transition[s, a, support]).tolist()
            row.append((cum, support.tolist(), reward[s, a, support].tolist()))
        table.append(row)
    return table


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(mdp: Mdp) -> ValidationReport:
    """Check stochasticity of every row, the discount and reward finiteness."""
    report = ValidationReport()
    P, R = mdp.transition, mdp.reward
    if not 0.0 < mdp.gamma < 1.0:
        report.violations.append(f"gamma={mdp.gamma} not in (0, 1)")
    for s, a in zip(*np.nonzero((P < 0).any(axis=2))):
        report.violations.append(f"negative probability at (s={s}, a={a})")
    sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_TOL)):
        report.violations.append(f"row (s={s}, a={a}) sums to {sums[s, a]!r}, expected 1")
    for s, a in zip(*np.nonzero(~np.isfinite(R).all(axis=2))):
        report.violations.append(f"non-finite reward at (s={s}, a={a})")
    for s in mdp.terminal_states:
        if not 0 <= s < mdp.num_states:
            report.violations.append(f"terminal state {s} out of range")
    return report


def sample_next(mdp: Mdp, s: int, a: int, rng: np.random.Generator) -> Transition:
    """Draw s' ~ P(.|s,a) using one uniform variate."""
    if s in mdp.terminal_states:
        raise RuntimeError(f"sampling from terminal state {s}")
    cum, nexts, rewards = mdp._sampler[s][a]
    u = rng.random()
    i = _search(cum, u)
    return Transition(s, a, nexts[i], rewards[i])


def draw_action(policy_row, rng: np.random.Generator) -> int:
    """Draw an action index from a probability row using one uniform variate."""
    row = list(policy_row)
    total = sum(row)
    if abs(total - 1.0) > POLICY_TOL or min(row) < 0.0:
        raise ValueError(f"policy row {row} is not on the probability simplex")
    u = rng.random()
    return _pick(row, u)


def _pick(row, u):
    acc = 0.0
    last = 0
    for i, p in enumerate(row):
        if p > 0.0:
            acc += p
            last = i
            if u < acc:
                return i
    # u fell in the rounding gap above the accumulated mass
    return last


def _search(cum, u):
    for i, c in enumerate(cum):
        if u < c:
            return i
    return len(cum) - 1
