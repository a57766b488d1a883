import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recmarl.environments import (
    LINE_ARRIVALS,
    LINE_Q_RELIABLE,
    AccessConfig,
    AccessConfigError,
    InvalidActionError,
    PowerConfig,
    PowerConfigError,
    access_kernel,
    access_line,
    access_realized_reward,
    access_reward,
    access_transition,
    build_network_mdp,
    decode_queue,
    encode_queue,
    power_grid,
    power_reward,
    power_transition,
)
from recmarl.environments.access import SILENT


def lone_node(q=0.9, w=0.5, deadline=2):
    return AccessConfig(availability=[[0]], arrival_prob=[w], success_prob=[q], deadline=deadline)


# --- access control -----------------------------------------------------------------------

def test_lone_transmitter_gets_q():
    assert access_reward(lone_node(), 0, [1], [0]) == pytest.approx(0.9)


def test_collision_zeroes_both():
    env = AccessConfig(availability=[[0], [0]], arrival_prob=[0.5, 0.5], success_prob=[0.9])
    assert access_reward(env, 0, [1, 3], [0, 0]) == 0.0
    assert access_reward(env, 1, [1, 3], [0, 0]) == 0.0
    # the other node staying silent clears the channel
    assert access_reward(env, 0, [1, 3], [0, SILENT]) == pytest.approx(0.9)


def test_silent_node_gets_nothing():
    assert access_reward(lone_node(), 0, [3], [SILENT]) == 0.0


def test_empty_queue_transmission_is_silence():
    assert access_reward(lone_node(), 0, [0], [0]) == 0.0


def test_unreachable_ap_rejected():
    env = access_line()
    with pytest.raises(InvalidActionError):
        access_reward(env, 0, [1, 1], [3, SILENT])
    with pytest.raises(InvalidActionError):
        access_transition(env, 0, 1, 2, np.random.default_rng(0))


def test_transition_empty_silent_no_arrivals():
    env = lone_node(w=0.0)
    assert access_transition(env, 0, 0, SILENT, np.random.default_rng(0)) == 0


def test_transition_deadline_expiry():
    env = lone_node(w=0.0)
    q = encode_queue((1, 0))  # one packet with one slot left
    assert decode_queue(access_transition(env, 0, q, SILENT, np.random.default_rng(0)), 2) == (0, 0)


def test_transition_transmit_with_arrival():
    env = lone_node(w=1.0)
    q = encode_queue((0, 1))
    assert decode_queue(access_transition(env, 0, q, 0, np.random.default_rng(0)), 2) == (0, 1)


def test_transition_ages_untransmitted_packets():
    env = lone_node(w=0.0, deadline=3)
    q = encode_queue((0, 1, 1))
    assert decode_queue(access_transition(env, 0, q, SILENT, np.random.default_rng(0)), 3) == (1, 1, 0)
    # transmission removes the earliest deadline first
    assert decode_queue(access_transition(env, 0, q, 0, np.random.default_rng(0)), 3) == (0, 1, 0)


def test_kernel_matches_sampled_transitions():
    env = access_line()
    K = access_kernel(env, 1)
    rng = np.random.default_rng(4)
    for s in range(4):
        for a, ap in enumerate(env.action_to_ap(1)):
            draws = np.array([access_transition(env, 1, s, ap, rng) for _ in range(4000)])
            freq = np.bincount(draws, minlength=4) / draws.size
            assert np.abs(freq - K[s, a]).max() < 0.03


def test_realized_reward_monte_carlo():
    rng = np.random.default_rng(2024)
    draws = np.array([access_realized_reward(lone_node(), 0, [1], [0], rng) for _ in range(100_000)])
    assert abs(draws.mean() - 0.9) <= 0.003


@pytest.mark.parametrize("q,expect", [(0.0, 0), (1.0, 1)])
def test_realized_reward_degenerate(q, expect):
    rng = np.random.default_rng(0)
    assert {access_realized_reward(lone_node(q), 0, [1], [0], rng) for _ in range(200)} == {expect}


@given(st.lists(st.integers(0, 1), min_size=1, max_size=6))
def test_queue_encoding_roundtrip(bits):
    assert decode_queue(encode_queue(bits), len(bits)) == tuple(bits)


def test_access_config_validation():
    with pytest.raises(AccessConfigError):
        AccessConfig(availability=[[0], [2]], arrival_prob=[0.5, 0.5], success_prob=[0.9])
    with pytest.raises(AccessConfigError):
        AccessConfig(availability=[[0]], arrival_prob=[1.5], success_prob=[0.9])
    with pytest.raises(AccessConfigError):
        AccessConfig(availability=[[0]], arrival_prob=[0.5], success_prob=[0.9], deadline=0)


def test_line_network_sizes():
    env = access_line(LINE_ARRIVALS, LINE_Q_RELIABLE)
    mdp = build_network_mdp(env)
    assert mdp.n_agents == 6 and env.ap_count == 5
    assert mdp.state_counts == (4,) * 6
    assert mdp.action_counts == (2, 3, 3, 3, 3, 2)
    assert mdp.neighborhood(2) == (1, 2, 3)


def test_deadline_one_has_two_states():
    assert build_network_mdp(access_line(deadline=1)).state_counts == (2,) * 6


def test_arrival_normalization_scales_rewards():
    raw = build_network_mdp(access_line())
    scaled = build_network_mdp(access_line(normalize="arrivals"))
    s, a = np.array([1] * 6), np.array([1, 0, 0, 0, 0, 1])
    factor = 6 / sum(LINE_ARRIVALS)
    assert scaled.rewards[0](s[[0, 1]], a[[0, 1]]) == pytest.approx(factor * raw.rewards[0](s[[0, 1]], a[[0, 1]]))


# --- power control ------------------------------------------------------------------------

def isolated_links(n=2, **kw):
    return PowerConfig(positions=[(float(i), 0.0) for i in range(n)], edges=[], **kw)


def test_zero_power_zero_reward():
    assert power_reward(isolated_links(1), 0, [0]) == 0.0


def test_unit_power_no_interference():
    assert power_reward(isolated_links(1), 0, [1]) == pytest.approx(math.log(11) - 0.1, abs=1e-12)
    assert power_reward(isolated_links(1), 0, [1]) == pytest.approx(2.2979, abs=5e-5)


def test_unit_power_with_interference():
    # kappa / d^2 = 0.1 / (1/3)^2 = 0.9 cross gain
    env = PowerConfig(positions=[(0.0, 0.0), (1 / 3, 0.0)], edges=[(0, 1)])
    assert env.gains[1, 0] == pytest.approx(0.9)
    assert power_reward(env, 0, [1, 1]) == pytest.approx(math.log(2) - 0.1, abs=1e-12)
    assert power_reward(env, 0, [1, 1]) == pytest.approx(0.5931, abs=5e-5)


@pytest.mark.parametrize("p,delta,expect", [(5, 1, 5), (0, -1, 0), (3, -1, 2), (2, 0, 2), (4, 1, 5)])
def test_power_transition(p, delta, expect):
    assert power_transition(isolated_links(1), p, delta) == expect


def test_power_transition_rejects_bad_delta():
    with pytest.raises(PowerConfigError):
        power_transition(isolated_links(1), 2, 2)


def test_power_rejects_out_of_range_levels():
    with pytest.raises(PowerConfigError):
        power_reward(isolated_links(1), 0, [6])


def test_power_grid_mdp():
    env = power_grid(2, 3)
    mdp = build_network_mdp(env)
    assert mdp.n_agents == 6
    assert mdp.state_counts == (6,) * 6 and mdp.action_counts == (3,) * 6
    assert sorted(env.graph.edges) == [(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]
    assert mdp.neighborhood(4) == (1, 3, 4, 5)


def test_power_reward_ignores_actions():
    env = power_grid(2, 3)
    mdp = build_network_mdp(env)
    nb = list(mdp.neighborhood(0))
    s = np.array([2, 3, 1])
    assert mdp.rewards[0](s, np.zeros(3, int)) == mdp.rewards[0](s, np.array([1, 2, 0]))
    assert mdp.rewards[0](s, np.zeros(3, int)) == pytest.approx(power_reward(env, 0, s))
    assert len(nb) == 3


def test_power_config_validation():
    with pytest.raises(PowerConfigError):
        PowerConfig(positions=[(0.0, 0.0), (0.0, 0.0)], edges=[(0, 1)])
    with pytest.raises(PowerConfigError):
        isolated_links(1, sigma=0.0)
    with pytest.raises(PowerConfigError):
        isolated_links(1, p_max=0)


def test_access_kernel_is_local():
    """Each node's next-state law depends only on its own queue and action."""
    from recmarl.network_mdp import step

    env = access_line(arrival_prob=(0.5, 0.3, 0.5), success_prob=(0.9, 0.95))
    mdp = build_network_mdp(env)
    for s1 in range(4):
        for a1 in range(3):
            outcomes = set()
            for s0 in range(4):
                for a0 in range(2):
                    for s2 in range(4):
                        for a2 in range(2):
                            nxt = step(mdp, [s0, s1, s2], [a0, a1, a2], np.random.default_rng(1))
                            outcomes.add(int(nxt[1]))
            assert len(outcomes) == 1


@pytest.mark.parametrize("deadline", [1, 2, 3])
def test_queue_state_space_is_closed(deadline):
    env = lone_node(w=0.7, deadline=deadline)
    K = access_kernel(env, 0)
    assert K.shape == (2**deadline, 2, 2**deadline) and np.allclose(K.sum(axis=2), 1.0)
    rng = np.random.default_rng(0)
    for s in range(2**deadline):
        for a in (SILENT, 0):
            for _ in range(20):
                nxt = access_transition(env, 0, s, a, rng)
                assert 0 <= nxt < 2**deadline
                assert set(decode_queue(nxt, deadline)) <= {0, 1}


def test_realized_reward_mean_matches_expected():
    env = access_line()
    rng = np.random.default_rng(6)
    s, aps = [1, 2, 3], [SILENT, 1, 2]  # node 1 alone on AP 1 among its neighbors
    p = access_reward(env, 1, s, aps)
    draws = np.array([access_realized_reward(env, 1, s, aps, rng) for _ in range(20_000)])
    assert abs(draws.mean() - p) <= 3 * math.sqrt(p * (1 - p) / draws.size)


@given(st.lists(st.integers(0, 5), min_size=3, max_size=3), st.integers(1, 2))
def test_power_reward_monotonicity(levels, who):
    env = power_grid(2, 3)  # levels are for the neighborhood (0, 1, 3)
    base = power_reward(env, 0, levels)
    louder = list(levels)
    if louder[who] < 5:
        louder[who] += 1
        assert power_reward(env, 0, louder) <= base
    # own rate term grows with own power
    own = list(levels)
    if own[0] < 5:
        own[0] += 1
        rate = lambda p: power_reward(env, 0, p) + env.price[0] * p[0]
        assert rate(own) > rate(levels)
