from dataclasses import replace

import numpy as np
import pytest

from multicritic.ac import AcConfig, critic_step, policy_signal, policy_step, train
from multicritic.gridworld import compile_scenario
from multicritic.mdp import Transition
from multicritic.numerics import Schedule
from multicritic.oracle import greedy_rollout, policy_evaluation, value_iteration


def test_critic_step_arithmetic():
    V = np.zeros(3)
    out = critic_step(V, Transition(0, 0, 1, 100.0), 0.1, 0.95)
    assert out[0] == pytest.approx(10.0)
    assert out[1:].tolist() == [0.0, 0.0]
    assert V[0] == 0.0  # input untouched


def test_critic_step_bellman_fixed_point():
    gamma = 0.9
    V = np.array([1 + gamma * 5.0, 5.0, 0.0])
    out = critic_step(V, Transition(0, 0, 1, 1.0), 0.7, gamma)
    assert np.array_equal(out, V)


def test_critic_step_converges_on_deterministic_chain():
    # s0 -> s1 (r=2), s1 -> s1 (r=1): closed form V1 = 1/(1-g), V0 = 2 + g V1
    gamma = 0.8
    exact = np.array([2 + gamma / (1 - gamma), 1 / (1 - gamma)])
    V = np.zeros(2)
    for _ in range(2000):
        V = critic_step(V, Transition(1, 0, 1, 1.0), 0.5, gamma)
        V = critic_step(V, Transition(0, 0, 1, 2.0), 0.5, gamma)
    assert V == pytest.approx(exact, abs=1e-10)


def test_policy_step_zero_td_leaves_row():
    pi = np.full((2, 4), 0.25)
    V = np.array([0.9 * 10 - 1, 10.0])
    out = policy_step(pi, V, Transition(0, 2, 1, -1.0), 0.5, 0.9)
    assert np.array_equal(out, pi)


def test_policy_step_positive_td_raises_chosen_action():
    pi = np.full((2, 4), 0.25)
    out = policy_step(pi, np.zeros(2), Transition(0, 1, 1, 5.0), 0.1, 0.9)
    assert out[0, 1] > 0.25
    assert out[0].sum() == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(out[1], pi[1])


def test_policy_step_sqrt_gate():
    pi = np.array([[0.0, 0.5, 0.5, 0.0]])
    out = policy_step(pi, np.zeros(1), Transition(0, 0, 0, 50.0), 0.1, 0.9)
    assert np.array_equal(out, pi)


def test_td_sign_conventions_differ_only_in_reward_sign():
    assert policy_signal(3.0, 4.0, -1.0, 0.5, "prose") == pytest.approx(-1 + 2 - 3)
    assert policy_signal(3.0, 4.0, -1.0, 0.5, "algorithm1") == pytest.approx(-(3 - 2 - 1))


def test_same_seed_same_curves(open5_mdp):
    a = train(open5_mdp, AcConfig(episodes=20, seed=9))
    b = train(open5_mdp, AcConfig(episodes=20, seed=9))
    assert a.curves == b.curves
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.policy, b.policy)


def test_invariants_hold_every_step(case1):
    sc = case1.deployments[-1]
    mdp = compile_scenario(sc)
    checked = []

    def check(t, s, a, s2, r, pi, values):
        row = pi[s]
        assert abs(sum(row) - 1) <= 1e-9 and min(row) >= 0
        assert values[sc.goal_index] == 0.0
        checked.append(t)

    result = train(mdp, AcConfig(episodes=30, seed=1), start=sc.start_index, on_step=check)
    assert len(checked) == result.total_steps
    c = result.curves
    for reward, steps, truncated in zip(c.rewards, c.steps, c.truncated):
        if not truncated:
            assert reward == 101 - steps


def test_truncation_is_recorded(open5_mdp):
    result = train(open5_mdp, AcConfig(episodes=3, max_steps_per_episode=2, seed=0))
    assert result.curves.truncated == [True, True, True]
    assert result.curves.steps == [2, 2, 2]


def test_critic_matches_linear_solve_on_chain(chain):
    exact = policy_evaluation(chain, np.ones((2, 1)))
    assert exact[0] == pytest.approx(3 / 0.55)
    averaging = AcConfig(episodes=20_000, value_schedule=Schedule.relative(1, 1.0, 1.0),
                         policy_schedule=Schedule.relative(1, 1.0, 0.5))
    finals = []
    for seed in range(8):
        result = train(chain, replace(averaging, seed=seed))
        assert result.values[1] == 0.0
        finals.append(result.values[0])
    assert abs(np.mean(finals) - exact[0]) < 2e-2


def test_open_grid_recovers_shortest_path(open5_mdp):
    result = train(open5_mdp, AcConfig(episodes=300, seed=0))
    states, reward = greedy_rollout(open5_mdp, result.policy, 0)
    assert len(states) - 1 == 8
    assert reward == 93.0


def test_greedy_policy_matches_value_iteration_on_3x3(open3):
    mdp = compile_scenario(open3)
    result = train(mdp, AcConfig(episodes=3000, seed=3, exploring_starts=True))
    sets = value_iteration(mdp).optimal_action_sets
    for s in range(mdp.num_states):
        if s not in mdp.terminal_states:
            assert int(result.policy[s].argmax()) in sets[s]


def test_config_rejects_fast_policy():
    with pytest.raises(ValueError):
        AcConfig(value_schedule=Schedule("inverse-time", 0.1), policy_schedule=Schedule("inverse-time", 1.0))
    with pytest.raises(ValueError):
        AcConfig(td_sign="other")
