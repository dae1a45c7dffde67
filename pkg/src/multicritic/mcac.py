"""Multi-critic actor-critic.

Instead of learning a critic, MCAC learns a point ``w`` on the simplex that
mixes N frozen, pre-trained value vectors; the policy then follows the TD
error of the mixture. The weights run on the fast clock and the policy on
the slow one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ac import TD_SIGNS, DEFAULT_MAX_STEPS, _bump_row
from .episodes import EpisodeCurves, as_array, run_episodes, uniform_policy
from .mdp import Mdp, Transition
from .numerics import Schedule, TwoTimescale, default_fast, default_slow, project_simplex_list

REWARD_SOURCES = ("current-env", "per-critic-tables")


@dataclass(frozen=True, eq=False)
class CriticBank:
    """Ordered, read-only stack of converged value vectors, shape (N, |S|)."""

    critics: np.ndarray
    scenario_names: tuple[str, ...] = ()
    reward_tables: np.ndarray | None = None  # (N, |S|, |A|, |S|) or None

    def __post_init__(self):
        critics = np.array(self.critics, dtype=np.float64)
        if critics.ndim == 1:
            critics = critics[None, :]
        if critics.ndim != 2 or critics.shape[0] < 1:
            raise ValueError("a critic bank needs at least one value vector")
        if not np.all(np.isfinite(critics)):
            raise ValueError("critic values must be finite")
        critics.setflags(write=False)
        object.__setattr__(self, "critics", critics)
        names = tuple(self.scenario_names) or tuple(f"critic{i}" for i in range(len(critics)))
        if len(names) != len(critics):
            raise ValueError("one scenario name per critic")
        object.__setattr__(self, "scenario_names", names)
        if self.reward_tables is not None:
            tables = np.array(self.reward_tables, dtype=np.float64)
            if tables.shape[0] != len(critics) or tables.shape[1] != critics.shape[1]:
                raise ValueError(f"reward tables shape {tables.shape} does not match the bank")
            tables.setflags(write=False)
            object.__setattr__(self, "reward_tables", tables)

    @property
    def size(self) -> int:
        return self.critics.shape[0]

    @property
    def state_count(self) -> int:
        return self.critics.shape[1]


@dataclass(frozen=True)
class McacConfig:
    gamma: float | None = None
    weight_schedule: Schedule = field(default_factory=default_fast)
    policy_schedule: Schedule = field(default_factory=default_slow)
    episodes: int = 100
    max_steps_per_episode: int = DEFAULT_MAX_STEPS
    seed: int = 0
    td_sign: str = "prose"
    critic_reward_source: str = "current-env"
    exploring_starts: bool = False
    record_weights: bool = True

    def __post_init__(self):
        if self.td_sign not in TD_SIGNS:
            raise ValueError(f"td_sign must be one of {TD_SIGNS}")
        if self.critic_reward_source not in REWARD_SOURCES:
            raise ValueError(f"critic_reward_source must be one of {REWARD_SOURCES}")
        if self.episodes < 1 or self.max_steps_per_episode < 1:
            raise ValueError("episodes and max_steps_per_episode must be positive")
        problems = TwoTimescale(self.weight_schedule, self.policy_schedule).check(horizon=10_000)
        if problems:
            raise ValueError("policy schedule must be slower than the weight schedule: " + "; ".join(problems))


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def combined_value(bank: CriticBank, w, s: int) -> float:
    return float(np.dot(w, bank.critics[:, s]))


def critic_td(bank: CriticBank, i: int, tr: Transition, gamma: float, td_sign: str = "prose",
              reward_source: str = "current-env") -> float:
    """TD term driving weight ``i``.

    ``prose``: ``r + gamma V_i(s') - V_i(s)``. ``algorithm1``:
    ``V_i(s) - gamma V_i(s') + r_i`` with ``r_i`` either the observed reward
    or the i-th critic's own reward table.
    """
    s, a, s2, r = tr
    v = bank.critics[i]
    if reward_source == "per-critic-tables":
        if bank.reward_tables is None:
            raise ValueError("per-critic reward source selected but the bank has no reward tables")
        r = float(bank.reward_tables[i, s, a, s2])
    if td_sign == "prose":
        return r + gamma * v[s2] - v[s]
    return v[s] - gamma * v[s2] + r


def weight_step(w, bank: CriticBank, tr: Transition, rate: float, gamma: float, td_sign: str = "prose",
                reward_source: str = "current-env") -> np.ndarray:
    tds = [critic_td(bank, i, tr, gamma, td_sign, reward_source) for i in range(bank.size)]
    return np.array(_weight_update(list(map(float, w)), tds, rate))


def _weight_update(w, tds, rate):
    return project_simplex_list([wi + rate * math.sqrt(wi) * d if wi > 0.0 else wi for wi, d in zip(w, tds)])


def combined_td(bank: CriticBank, w, tr: Transition, gamma: float, td_sign: str = "prose") -> float:
    """Mixture TD error as used by the policy update.

    ``prose``: ``sum_i w_i [V_i(s) - gamma V_i(s')] - r``, the negated
    classical TD error of the mixture. ``algorithm1`` adds ``r`` instead.
    """
    s, _, s2, r = tr
    base = float(np.dot(w, bank.critics[:, s] - gamma * bank.critics[:, s2]))
    return base - r if td_sign == "prose" else base + r


def policy_step_mcac(policy: np.ndarray, bank: CriticBank, w, tr: Transition, rate: float, gamma: float,
                     td_sign: str = "prose") -> np.ndarray:
    s, a = tr.state, tr.action
    out = np.array(policy, dtype=np.float64)
    out[s] = _bump_row(out[s].tolist(), a, rate, -combined_td(bank, w, tr, gamma, td_sign))
    return out


@dataclass
class McacResult:
    policy: np.ndarray
    weights: np.ndarray
    weight_trace: np.ndarray  # (steps + 1, N); row 0 is the initial uniform vector
    curves: EpisodeCurves
    total_steps: int

    @property
    def trainable_parameters(self) -> int:
        return self.weights.size + self.policy.size


def train_mcac(mdp: Mdp, bank: CriticBank, cfg: McacConfig = McacConfig(), start: int = 0,
               on_step=None) -> McacResult:
    """Run MCAC: per step, update ``w`` from each critic's TD term, then the
    policy row from the mixture TD error evaluated at the pre-update ``w``.
    The bank is never modified.
    """
    if bank.state_count != mdp.num_states:
        raise ValueError(f"bank covers {bank.state_count} states but the MDP has {mdp.num_states}")
    if cfg.critic_reward_source == "per-critic-tables" and bank.reward_tables is None:
        raise ValueError("per-critic reward source selected but the bank has no reward tables")
    gamma = mdp.gamma if cfg.gamma is None else cfg.gamma
    rng = np.random.default_rng(cfg.seed)
    n = bank.size
    critics = bank.critics.T.tolist()  # critics[s][i]
    tables = bank.reward_tables if cfg.critic_reward_source == "per-critic-tables" else None
    prose = cfg.td_sign == "prose"
    pi = uniform_policy(mdp.num_states, mdp.num_actions)
    w = [1.0 / n] * n
    trace = [list(w)] if cfg.record_weights else None
    weight_rate = cfg.weight_schedule.rate
    policy_rate = cfg.policy_schedule.rate

    def update(t, s, a, s2, r):
        nonlocal w
        vs, vn = critics[s], critics[s2]
        rs = [r] * n if tables is None else tables[:, s, a, s2].tolist()
        if prose:
            tds = [ri + gamma * b - c for ri, b, c in zip(rs, vn, vs)]
        else:
            tds = [c - gamma * b + ri for ri, b, c in zip(rs, vn, vs)]
        mix = sum(wi * (c - gamma * b) for wi, b, c in zip(w, vn, vs))
        e_hat = mix - r if prose else mix + r
        w = _weight_update(w, tds, weight_rate(t))
        pi[s] = _bump_row(pi[s], a, policy_rate(t), -e_hat)
        if trace is not None:
            trace.append(w)

    curves, steps = run_episodes(
        mdp, pi, update, episodes=cfg.episodes, max_steps=cfg.max_steps_per_episode, rng=rng,
        start=start, exploring_starts=cfg.exploring_starts,
        on_step=None if on_step is None else (lambda *tr: on_step(*tr, pi=pi, weights=w)),
    )
    trace_arr = np.array(trace) if trace is not None else np.empty((0, n))
    return McacResult(as_array(pi), np.array(w), trace_arr, curves, steps)
