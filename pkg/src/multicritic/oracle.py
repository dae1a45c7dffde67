"""Exact solvers used to check the learners: value iteration, policy
evaluation, breadth-first shortest paths and greedy rollouts."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .gridworld import GridScenario
from .mdp import Mdp

TIE_TOL = 1e-9


class NotConverged(RuntimeError):
    pass


@dataclass
class ExactSolution:
    optimal_values: np.ndarray
    optimal_action_sets: list[frozenset[int]]
    iterations: int
    residual: float
    residual_history: list[float]


def _q_values(mdp: Mdp, V: np.ndarray) -> np.ndarray:
    # Q[s, a] = sum_s' P[s,a,s'] (r[s,a,s'] + gamma V[s'])
    Q = np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward) + mdp.gamma * mdp.transition @ V
    terminal = sorted(mdp.terminal_states)
    Q[terminal] = 0.0
    return Q


def value_iteration(mdp: Mdp, tol: float = 1e-10, max_iter: int = 100_000) -> ExactSolution:
    """Bellman optimality sweeps until the sup-norm residual drops below ``tol``.
    Terminal states are absorbing with value 0."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 < mdp.gamma < 1.0:
        raise NotConverged(f"gamma={mdp.gamma} does not give a contraction")
    V = np.zeros(mdp.num_states)
    history = []
    for it in range(1, max_iter + 1):
        new = _q_values(mdp, V).max(axis=1)
        residual = float(np.max(np.abs(new - V)))
        history.append(residual)
        V = new
        if residual < tol:
            break
    else:
        raise NotConverged(f"value iteration did not reach tol={tol} in {max_iter} sweeps")
    Q = _q_values(mdp, V)
    best = Q.max(axis=1, keepdims=True)
    sets = [frozenset(np.flatnonzero(row >= b - TIE_TOL).tolist()) for row, b in zip(Q, best)]
    return ExactSolution(V, sets, it, residual, history)


def policy_evaluation(mdp: Mdp, policy, tol: float = 1e-10) -> np.ndarray:
    """Value of a stochastic policy, by a direct linear solve checked against ``tol``."""
    pi = np.asarray(policy, dtype=np.float64)
    n = mdp.num_states
    P_pi = np.einsum("ia,iaj->ij", pi, mdp.transition)
    r_pi = np.einsum("ia,iaj,iaj->i", pi, mdp.transition, mdp.reward)
    terminal = sorted(mdp.terminal_states)
    P_pi[terminal] = 0.0
    r_pi[terminal] = 0.0
    V = np.linalg.solve(np.eye(n) - mdp.gamma * P_pi, r_pi)
    residual = float(np.max(np.abs(r_pi + mdp.gamma * P_pi @ V - V)))
    if not residual < tol:
        raise NotConverged(f"policy evaluation residual {residual} >= {tol}")
    return V


def greedy_policy(values: np.ndarray, mdp: Mdp) -> np.ndarray:
    """One-hot policy picking the first maximiser of Q under ``values``."""
    Q = _q_values(mdp, np.asarray(values, dtype=np.float64))
    out = np.zeros_like(Q)
    out[np.arange(len(Q)), Q.argmax(axis=1)] = 1.0
    return out


def shortest_path_steps(scenario: GridScenario) -> int:
    """Fewest moves from start to goal, treating obstacles as passable."""
    scenario.check()
    seen = {scenario.start: 0}
    queue = deque([scenario.start])
    while queue:
        cell = queue.popleft()
        if cell == scenario.goal:
            return seen[cell]
        for a in range(4):
            nxt = scenario.target(cell, a)
            if nxt not in seen:
                seen[nxt] = seen[cell] + 1
                queue.append(nxt)
    raise ValueError(f"goal unreachable in scenario {scenario.name!r}")


def greedy_rollout(mdp: Mdp, policy, start: int, max_steps: int = 10_000):
    """Follow the argmax action and its intended successor from ``start``.

    Returns ``(states, total_reward)`` where ``states`` includes the start,
    or ``None`` if the rollout revisits a state before reaching a terminal.
    """
    pi = np.asarray(policy)
    s = start
    states = [s]
    seen = {s}
    total = 0.0
    while s not in mdp.terminal_states and len(states) <= max_steps:
        a = int(pi[s].argmax())
        moves = mdp.transition[s, a].copy()
        # a sticky cell's self-loop is not the intended move
        if np.count_nonzero(moves) > 1:
            moves[s] = 0.0
        s2 = int(moves.argmax())
        total += float(mdp.reward[s, a, s2])
        s = s2
        if s in seen:
            return None
        seen.add(s)
        states.append(s)
    return states, total


def greedy_path_length(mdp: Mdp, policy, start: int) -> int | None:
    out = greedy_rollout(mdp, policy, start)
    return None if out is None else len(out[0]) - 1
