import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multicritic.ac import AcConfig, train
from multicritic.gridworld import compile_scenario
from multicritic.mcac import (
    CriticBank, McacConfig, combined_td, combined_value, critic_td, policy_step_mcac, train_mcac, uniform_weights,
    weight_step,
)
from multicritic.mdp import Transition
from multicritic.oracle import greedy_rollout

floats = st.floats(-100, 100, allow_nan=False)


def bank_of(*columns):
    """Bank whose critic i takes values columns[s][i] at state s."""
    return CriticBank(np.array(columns, dtype=float).T)


def test_combined_value_examples():
    one = CriticBank(np.array([[3.0, 7.0]]))
    assert combined_value(one, [1.0], 1) == 7.0
    two = bank_of([10.0, 20.0])
    assert combined_value(two, [0.5, 0.5], 0) == 15.0
    four = CriticBank(np.arange(12.0).reshape(4, 3))
    assert combined_value(four, uniform_weights(4), 2) == pytest.approx(np.mean(four.critics[:, 2]))


def test_critic_td_examples():
    bank = bank_of([50.0], [60.0])
    tr = Transition(0, 0, 1, -1.0)
    assert critic_td(bank, 0, tr, 0.95) == pytest.approx(6.0)
    consistent = bank_of([-1 + 0.9 * 4.0], [4.0])
    assert critic_td(consistent, 0, tr, 0.9) == pytest.approx(0.0, abs=1e-12)


@given(floats, floats, floats, st.floats(0.01, 0.99))
def test_sign_conventions_are_negatives(v0, v1, r, gamma):
    bank = bank_of([v0], [v1])
    tr = Transition(0, 0, 1, r)
    prose = critic_td(bank, 0, tr, gamma, "prose")
    alt = critic_td(bank, 0, tr, gamma, "algorithm1")
    # prose = r + g v1 - v0 ; algorithm1 = v0 - g v1 + r ; they negate each other when r enters both
    assert alt == pytest.approx(-(prose - 2 * r), abs=1e-9)


def test_per_critic_rewards_need_tables():
    bank = bank_of([1.0], [2.0])
    with pytest.raises(ValueError):
        critic_td(bank, 0, Transition(0, 0, 1, 0.0), 0.9, reward_source="per-critic-tables")


def test_per_critic_reward_tables_are_used():
    tables = np.zeros((1, 2, 1, 2))
    tables[0, 0, 0, 1] = 7.0
    bank = CriticBank(np.array([[0.0, 0.0]]), reward_tables=tables)
    tr = Transition(0, 0, 1, -1.0)
    assert critic_td(bank, 0, tr, 0.9, "algorithm1", "per-critic-tables") == 7.0


def test_weight_step_zero_td_keeps_weights():
    bank = bank_of([0.9 * 5 - 1, 0.9 * 2 - 1], [5.0, 2.0])
    w = np.array([0.3, 0.7])
    assert np.array_equal(weight_step(w, bank, Transition(0, 0, 1, -1.0), 0.5, 0.9), w)


def test_weight_step_formula():
    # critic TDs with r=0, gamma=1 excluded; choose values giving TDs (+2, -2)
    bank = bank_of([0.0, 4.0], [2.0, 2.0])
    tr = Transition(0, 0, 1, 0.0)
    tds = [critic_td(bank, i, tr, 1.0 - 1e-16) for i in range(2)]
    assert tds == pytest.approx([2.0, -2.0])
    w = weight_step([0.5, 0.5], bank, tr, 0.1, 1.0 - 1e-16)
    expected = [0.5 + 0.1 * math.sqrt(0.5) * 2, 0.5 - 0.1 * math.sqrt(0.5) * 2]
    assert expected == pytest.approx([0.6414, 0.3586], abs=1e-4)
    assert w == pytest.approx(expected, abs=1e-15)


def test_weight_step_sqrt_gate():
    bank = bank_of([0.0, 0.0], [50.0, 50.0])
    w = weight_step([1.0, 0.0], bank, Transition(0, 0, 1, 0.0), 0.1, 0.9)
    # only coordinate 0 drifts; projection then pulls it back to the vertex
    assert w.tolist() == [1.0, 0.0]


def test_combined_td_example():
    bank = bank_of([10.0, 20.0], [30.0, 40.0])
    e = combined_td(bank, [0.5, 0.5], Transition(0, 0, 1, -1.0), 0.9)
    assert e == pytest.approx(15 - 0.9 * 35 + 1)
    assert e == pytest.approx(-15.5)


def test_combined_td_zero_for_consistent_single_critic():
    bank = bank_of([-1 + 0.9 * 4.0], [4.0])
    assert combined_td(bank, [1.0], Transition(0, 0, 1, -1.0), 0.9) == pytest.approx(0.0, abs=1e-12)


@given(st.lists(st.tuples(floats, floats), min_size=1, max_size=5), floats, st.floats(0.01, 0.99), st.data())
def test_combined_td_identities(pairs, r, gamma, data):
    bank = bank_of([p[0] for p in pairs], [p[1] for p in pairs])
    raw = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(pairs), max_size=len(pairs)))
    w = np.array(raw) + 1e-3
    w = w / w.sum()
    tr = Transition(0, 0, 1, r)
    e = combined_td(bank, w, tr, gamma)
    v_s, v_next = combined_value(bank, w, 0), combined_value(bank, w, 1)
    assert e == pytest.approx(-(r + gamma * v_next - v_s), abs=1e-8)
    assert e == pytest.approx(-sum(wi * critic_td(bank, i, tr, gamma) for i, wi in enumerate(w)), abs=1e-8)


@given(st.lists(floats, min_size=3, max_size=3), st.floats(0, 1))
def test_combined_value_linear_in_weights(values, alpha):
    bank = CriticBank(np.array(values)[:, None])
    w1, w2 = np.array([1.0, 0, 0]), np.array([0.2, 0.3, 0.5])
    mix = alpha * w1 + (1 - alpha) * w2
    assert combined_value(bank, mix, 0) == pytest.approx(
        alpha * combined_value(bank, w1, 0) + (1 - alpha) * combined_value(bank, w2, 0), abs=1e-9)


def test_policy_step_mcac_examples():
    pi = np.full((2, 4), 0.25)
    flat = bank_of([0.9 * 5 - 1], [5.0])
    assert np.array_equal(policy_step_mcac(pi, flat, [1.0], Transition(0, 1, 1, -1.0), 0.3, 0.9), pi)
    rising = bank_of([0.0], [10.0])  # E_hat = 0 - 9 + 1 < 0
    out = policy_step_mcac(pi, rising, [1.0], Transition(0, 1, 1, -1.0), 0.3, 0.9)
    assert out[0, 1] > 0.25
    assert out[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_identical_critics_keep_weights_uniform(case1):
    sc = case1.deployments[0]
    mdp = compile_scenario(sc)
    critic = train(mdp, AcConfig(episodes=30, seed=0)).values
    bank = CriticBank(np.stack([critic] * 3))
    result = train_mcac(mdp, bank, McacConfig(episodes=10, seed=0))
    assert np.allclose(result.weight_trace, 1 / 3, atol=1e-12)


def test_run_invariants_and_determinism(case1):
    sc = case1.deployments[-1]
    mdp = compile_scenario(sc)
    bank = CriticBank(np.random.default_rng(0).normal(50, 20, size=(3, 25)))
    before = bank.critics.copy()
    rows = []

    def check(t, s, a, s2, r, pi, weights):
        rows.append((abs(sum(pi[s]) - 1) <= 1e-9) and min(pi[s]) >= 0)

    a = train_mcac(mdp, bank, McacConfig(episodes=20, seed=4), on_step=check)
    b = train_mcac(mdp, bank, McacConfig(episodes=20, seed=4))
    assert all(rows) and len(rows) == a.total_steps
    assert np.array_equal(a.weight_trace, b.weight_trace)
    assert a.curves == b.curves
    assert a.weight_trace.shape == (a.total_steps + 1, 3)
    assert np.all(np.abs(a.weight_trace.sum(axis=1) - 1) <= 1e-9)
    assert a.weight_trace.min() >= 0
    assert np.array_equal(bank.critics, before)
    assert not bank.critics.flags.writeable
    assert a.trainable_parameters == 3 + 25 * 4


def test_state_count_mismatch(open5_mdp):
    with pytest.raises(ValueError, match="states"):
        train_mcac(open5_mdp, CriticBank(np.zeros((2, 9))), McacConfig(episodes=1))


def test_single_correct_critic_recovers_shortest_path(open3):
    mdp = compile_scenario(open3)
    critic = train(mdp, AcConfig(episodes=300, seed=0)).values
    result = train_mcac(mdp, CriticBank(critic[None]), McacConfig(episodes=300, seed=0))
    states, reward = greedy_rollout(mdp, result.policy, 0)
    assert len(states) - 1 == 4
    assert reward == 97.0


def test_bank_validation():
    with pytest.raises(ValueError):
        CriticBank(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        CriticBank(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        CriticBank(np.zeros((2, 4)), scenario_names=("only-one",))
