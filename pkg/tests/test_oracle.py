import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recmarl import oracle
from recmarl.instances import complete_edges, cooperative_pair, line_edges, random_network_mdp
from recmarl.network_mdp import PolicyParams, global_reward, joint_policy_prob

from conftest import constant_reward_mdp


def _joint_states(mdp):
    return [np.array(np.unravel_index(i, mdp.state_counts, order="F")) for i in range(int(np.prod(mdp.state_counts)))]


def _joint_actions(mdp):
    return [np.array(x)[::-1] for x in itertools.product(*[range(a) for a in mdp.action_counts[::-1]])]


def _value_iteration(mdp, params, tol=1e-13):
    """Independent oracle: iterate the Bellman operator by explicit enumeration."""
    S, A = _joint_states(mdp), _joint_actions(mdp)
    nS = len(S)
    R = np.zeros(nS)
    P = np.zeros((nS, nS))
    for i, s in enumerate(S):
        for a in A:
            p = joint_policy_prob(mdp, params, s, a)
            R[i] += p * global_reward(mdp, s, a)
            for j, s2 in enumerate(S):
                P[i, j] += p * np.prod([mdp.locals[n].kernel[s[n], a[n], s2[n]] for n in range(mdp.n_agents)])
    V = np.zeros(nS)
    while True:
        V2 = R + mdp.gamma * P @ V
        if np.abs(V2 - V).max() < tol:
            return V2
        V = V2


# --- global and local values ----------------------------------------------------------------

def test_myopic_value(pair):
    mdp, params = pair
    mdp = random_network_mdp(np.random.default_rng(1), [(0, 1)], 2, [2, 2], [2, 2], 0.0)
    g = oracle.solve_global_value(mdp, params)
    for i, s in enumerate(_joint_states(mdp)):
        expect = sum(joint_policy_prob(mdp, params, s, a) * global_reward(mdp, s, a) for a in _joint_actions(mdp))
        assert g.V[i] == pytest.approx(expect, abs=1e-14)


def test_constant_reward_value():
    mdp = constant_reward_mdp(2.5, n_agents=3, gamma=0.8)
    V = oracle.solve_global_value(mdp, PolicyParams.random(mdp, np.random.default_rng(0))).V
    assert np.allclose(V, 2.5 / 0.2, atol=1e-12)


def test_global_value_matches_value_iteration(pair):
    mdp, params = pair
    assert np.abs(oracle.solve_global_value(mdp, params).V - _value_iteration(mdp, params)).max() < 1e-11


def test_q_is_consistent_with_v(line3):
    mdp, params = line3
    g = oracle.solve_global_value(mdp, params)
    assert np.allclose((g.pi * g.Q).sum(axis=1), g.V, atol=1e-12)
    assert np.allclose(g.pi.sum(axis=1), 1.0)


def test_isolated_agent_local_value(rng):
    mdp = random_network_mdp(rng, [(0, 1)], 3, [2, 2, 3], [2, 2, 2], 0.9)
    params = PolicyParams.random(mdp, rng)
    lv = oracle.solve_local_value(mdp, params, 2)
    assert lv.neighborhood == (2,)
    # single-agent policy evaluation by hand
    pi = params.probs(2)
    R = mdp.reward_table(2)
    P = np.einsum("sa,sat->st", pi, mdp.locals[2].kernel)
    expect = np.linalg.solve(np.eye(3) - 0.9 * P, (pi * R).sum(axis=1))
    assert np.allclose(lv.V, expect, atol=1e-12)


def test_zero_local_reward_gives_zero_value():
    mdp = constant_reward_mdp(0.0, n_agents=3)
    lv = oracle.solve_local_value(mdp, PolicyParams.zeros(mdp), 1)
    assert np.all(lv.V == 0)


def test_middle_agent_matches_truncated_enumeration():
    """E[sum_t gamma^t r_1 | s_N(1)] by summing over all length-50 paths of the neighborhood chain."""
    rng = np.random.default_rng(42)
    mdp = random_network_mdp(rng, line_edges(3), 3, [2, 2, 2], [2, 2, 2], 0.8)
    params = PolicyParams.random(mdp, rng)
    lv = oracle.solve_local_value(mdp, params, 1)
    # distribution over the whole neighborhood joint state, propagated step by step;
    # the neighborhood is {0, 1, 2} so the chain over (s0, s1, s2) is exact enumeration
    S = _joint_states(mdp)
    A = _joint_actions(mdp)
    nS = len(S)
    r1 = np.zeros(nS)
    P = np.zeros((nS, nS))
    for i, s in enumerate(S):
        for a in A:
            p = joint_policy_prob(mdp, params, s, a)
            r1[i] += p * mdp.rewards[1](s, a)
            for j, s2 in enumerate(S):
                P[i, j] += p * np.prod([mdp.locals[n].kernel[s[n], a[n], s2[n]] for n in range(3)])
    tail_bound = 0.8**50 * np.abs(r1).max() / 0.2
    for i in range(nS):
        dist = np.eye(nS)[i]
        total = 0.0
        for t in range(50):
            total += 0.8**t * dist @ r1
            dist = dist @ P
        # the length-50 sum misses at most gamma^50 r_max / (1 - gamma) (about 7e-5 here)
        assert abs(lv.V[i] - total) <= tail_bound
        # adding back the exact tail gamma^50 E[V(s_50)] closes the gap to 1e-6
        assert lv.V[i] == pytest.approx(total + 0.8**50 * dist @ lv.V, abs=1e-6)


def test_oracle_cap():
    mdp = constant_reward_mdp(1.0, n_agents=3, states=3, actions=3)
    with pytest.raises(oracle.OracleSizeError):
        oracle.solve_global_value(mdp, PolicyParams.zeros(mdp), cap=100)


# --- decomposition --------------------------------------------------------------------------

def test_decomposition_single_agent(rng):
    mdp = random_network_mdp(rng, [], 1, [3], [2], 0.9)
    assert oracle.verify_value_decomposition(mdp, PolicyParams.random(mdp, rng)) == 0.0


def test_decomposition_line_many_policies():
    rng = np.random.default_rng(5)
    mdp = random_network_mdp(rng, line_edges(3), 3, [2, 2, 2], [2, 2, 2], 0.9)
    for _ in range(100):
        assert oracle.verify_value_decomposition(mdp, PolicyParams.random(mdp, rng, 2.0)) <= 1e-8


def test_decomposition_complete_graph(rng):
    mdp = random_network_mdp(rng, complete_edges(3), 3, [2, 3, 2], [2, 2, 3], 0.9)
    assert oracle.verify_value_decomposition(mdp, PolicyParams.random(mdp, rng)) <= 1e-8


@given(st.integers(0, 2**31 - 1), st.sampled_from(["line", "star", "cycle"]), st.integers(2, 4))
def test_decomposition_property(seed, kind, N):
    from recmarl.instances import GRAPHS
    rng = np.random.default_rng(seed)
    mdp = random_network_mdp(rng, GRAPHS[kind](N), N, [2] * N, [2] * N, 0.9)
    assert oracle.verify_value_decomposition(mdp, PolicyParams.random(mdp, rng)) <= 1e-8


# --- occupancy ---------------------------------------------------------------------------------

def test_occupancy_myopic_is_initial(rng):
    mdp = random_network_mdp(rng, [(0, 1)], 2, [2, 3], [2, 2], 0.0)
    d = oracle.occupancy(mdp, PolicyParams.random(mdp, rng))
    assert np.allclose(d, oracle.joint_init_dist(mdp), atol=1e-15)


def test_occupancy_identity_kernel(rng):
    mdp = constant_reward_mdp(0.0, n_agents=2, states=3, kernel=np.tile(np.eye(3)[:, None, :], (1, 2, 1)))
    d = oracle.occupancy(mdp, PolicyParams.random(mdp, rng))
    assert np.allclose(d, oracle.joint_init_dist(mdp), atol=1e-12)


def test_occupancy_power_series(line3):
    mdp, params = line3
    mdp = random_network_mdp(np.random.default_rng(9), line_edges(3), 3, [2, 3, 2], [3, 2, 2], 0.9)
    P = oracle.local_chain(mdp, params, 0)  # sanity: the chain helper returns row-stochastic matrices
    assert np.allclose(P.sum(axis=1), 1.0)
    P = oracle._chain(mdp, params, range(3))
    p = oracle.joint_init_dist(mdp)
    d = np.zeros_like(p)
    for t in range(201):
        d += 0.9**t * p
        p = p @ P
    assert np.abs(oracle.occupancy(mdp, params) - 0.1 * d).max() <= 1e-8 + 0.9**201


@given(st.integers(0, 2**31 - 1))
def test_occupancy_is_distribution_dominating_initial(seed):
    rng = np.random.default_rng(seed)
    mdp = random_network_mdp(rng, [(0, 1)], 2, [2, 3], [2, 2], 0.9)
    d = oracle.occupancy(mdp, PolicyParams.random(mdp, rng))
    assert abs(d.sum() - 1) < 1e-12
    assert np.all(d >= (1 - mdp.gamma) * oracle.joint_init_dist(mdp) - 1e-14)


# --- gradients -----------------------------------------------------------------------------------

def test_zero_reward_zero_gradient(rng):
    mdp = constant_reward_mdp(0.0, n_agents=3)
    grads = oracle.exact_gradient(mdp, PolicyParams.random(mdp, rng))
    assert all(np.all(g == 0) for g in grads)


def test_single_agent_policy_gradient(rng):
    mdp = random_network_mdp(rng, [], 1, [3], [3], 0.9)
    params = PolicyParams.random(mdp, rng)
    g = oracle.solve_global_value(mdp, params)
    d = oracle.occupancy(mdp, params)
    pi = params.probs(0)
    adv = g.Q - g.V[:, None]
    expect = d[:, None] * pi * adv / (1 - mdp.gamma)  # d/dtheta(s,a) of V for a tabular softmax
    assert np.allclose(oracle.exact_gradient(mdp, params)[0], expect, atol=1e-12)


def test_gradient_matches_finite_differences(pair):
    mdp, params = pair
    exact = np.concatenate([g.ravel() for g in oracle.exact_gradient(mdp, params)])
    fd = np.concatenate([g.ravel() for g in oracle.fd_gradient(mdp, params, 1e-5)])
    assert np.abs(exact - fd).max() / np.abs(fd).max() <= 1e-4


def test_gradient_forms_agree(line3):
    mdp, params = line3
    adv = oracle.exact_gradient(mdp, params)
    q = oracle.exact_gradient(mdp, params, form="q")
    glob = oracle.naive_global_gradient(mdp, params)
    for a, b, c in zip(adv, q, glob):
        assert np.abs(a - b).max() < 1e-10 and np.abs(a - c).max() < 1e-10


def test_finite_differences_second_order(pair):
    mdp, params = pair
    exact = np.concatenate([g.ravel() for g in oracle.exact_gradient(mdp, params)])
    errs = [np.abs(np.concatenate([g.ravel() for g in oracle.fd_gradient(mdp, params, h)]) - exact).max()
            for h in (1e-3, 5e-4)]
    assert errs[1] < errs[0] / 3  # O(h^2): halving h cuts the error about 4x


def test_fd_constant_reward_is_zero(rng):
    mdp = constant_reward_mdp(1.0)
    assert max(np.abs(g).max() for g in oracle.fd_gradient(mdp, PolicyParams.random(mdp, rng))) <= 1e-6


@pytest.mark.parametrize("h", [1e-9, 1e-2])
def test_fd_step_guard(pair, h):
    mdp, params = pair
    with pytest.raises(Exception):
        oracle.fd_gradient(mdp, params, h)


def test_truncated_gradient_converges_to_exact(pair):
    mdp, params = pair
    exact = oracle.exact_gradient(mdp, params)
    trunc = oracle.truncated_gradient(mdp, params, 400)
    # sum_{h>=1} gamma^h rho P^{h-1} = gamma d / (1 - gamma), and the estimator keeps its own
    # 1 / (1 - gamma) prefactor, so the infinite-horizon limit is gamma / (1 - gamma) times grad V
    for e, t in zip(exact, trunc):
        assert np.allclose(t, mdp.gamma / (1 - mdp.gamma) * e, atol=1e-10)


# --- regularizer ----------------------------------------------------------------------------

def test_regularized_objective_lambda_zero(pair):
    mdp, params = pair
    assert oracle.regularized_objective(mdp, params, 0.0) == oracle.value_at(mdp, params)


def test_regularizer_uniform_closed_form(line3):
    mdp, _ = line3
    mdp = random_network_mdp(np.random.default_rng(0), line_edges(3), 3, [2, 3, 2], [3, 3, 3], 0.8)
    params = PolicyParams.zeros(mdp)
    lam = 0.7
    assert oracle.regularized_objective(mdp, params, lam) == pytest.approx(
        oracle.value_at(mdp, params) + lam * 3 * math.log(1 / 3), abs=1e-12)


def test_regularized_gradient_lambda_zero(pair):
    mdp, params = pair
    for a, b in zip(oracle.exact_regularized_gradient(mdp, params, 0.0), oracle.exact_gradient(mdp, params)):
        assert np.array_equal(a, b)


def test_regularizer_gradient_vanishes_at_uniform(line3):
    mdp, _ = line3
    for g in oracle.regularizer_gradient(mdp, PolicyParams.zeros(mdp), 0.5):
        assert np.all(g == 0)


def test_regularized_gradient_finite_differences(pair):
    mdp, params = pair
    lam = 0.1
    exact = oracle.exact_regularized_gradient(mdp, params, lam)
    fd = oracle.fd_gradient(mdp, params, 1e-5, objective=lambda p: oracle.regularized_objective(mdp, p, lam))
    num = max(np.abs(a - b).max() for a, b in zip(exact, fd))
    assert num / max(np.abs(b).max() for b in fd) <= 1e-4


def test_smoothness_constant():
    mdp = constant_reward_mdp(0.0, n_agents=2, states=2, gamma=0.9)
    assert oracle.smoothness_constant(mdp, 0.5) == pytest.approx(48 * 4 / 0.001 + 2 * (2 * 0.5 / 2))


# --- optimal control ---------------------------------------------------------------------------

def test_policy_iteration_matches_enumeration():
    rng = np.random.default_rng(11)
    mdp = random_network_mdp(rng, [(0, 1)], 2, [2, 2], [2, 2], 0.9)
    opt = oracle.joint_policy_iteration(mdp)
    # V* by value iteration on the joint MDP, enumerating joint actions
    S, A = _joint_states(mdp), _joint_actions(mdp)
    V = np.zeros(len(S))
    for _ in range(2000):
        V = np.array([max(global_reward(mdp, s, a) + mdp.gamma * sum(
            np.prod([mdp.locals[n].kernel[s[n], a[n], s2[n]] for n in range(2)]) * V[j]
            for j, s2 in enumerate(S)) for a in A) for s in S])
    assert np.allclose(opt.V, V, atol=1e-9)


def test_cooperative_pair_is_locally_realizable():
    mdp = cooperative_pair()
    opt = oracle.joint_policy_iteration(mdp)
    assert oracle.is_locally_realizable(mdp, opt)
    assert np.all(opt.actions == 1)
    params = oracle.deterministic_params(mdp, [[1, 1], [1, 1]])
    assert oracle.value_at(mdp, params) == pytest.approx(opt.value, abs=1e-9)
    assert oracle.optimal_action_prob(mdp, PolicyParams.zeros(mdp), opt) == pytest.approx(0.25)


@given(st.integers(0, 2**31 - 1))
def test_bellman_residual(seed):
    rng = np.random.default_rng(seed)
    mdp = random_network_mdp(rng, line_edges(3), 3, [2, 3, 2], [2, 2, 2], 0.9)
    params = PolicyParams.random(mdp, rng)
    g = oracle.solve_global_value(mdp, params)
    P = oracle._chain(mdp, params, range(3))
    assert np.abs(g.V - ((g.pi * g.Q).sum(axis=1))).max() <= 1e-10
    R = (g.pi * oracle._as_matrix(oracle.global_reward_tensor(mdp), 3)).sum(axis=1)
    assert np.abs(g.V - R - mdp.gamma * P @ g.V).max() <= 1e-10
    for lv in oracle.solve_local_values(mdp, params):
        Pn = oracle._chain(mdp, params, lv.neighborhood)
        Rn = (oracle._as_matrix(oracle._policy_tensor(mdp, params, lv.neighborhood), len(lv.neighborhood))
              * oracle._as_matrix(mdp.reward_table(lv.agent), len(lv.neighborhood))).sum(axis=1)
        assert np.abs(lv.V - Rn - mdp.gamma * Pn @ lv.V).max() <= 1e-10


def test_gradient_rows_sum_to_zero(line3):
    """Softmax score rows sum to zero, so every gradient row does too."""
    mdp, params = line3
    for form in (oracle.exact_gradient(mdp, params), oracle.regularizer_gradient(mdp, params, 0.3)):
        for g in form:
            assert np.abs(g.sum(axis=1)).max() <= 1e-12
