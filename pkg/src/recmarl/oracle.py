"""Exact computations on small joint MDPs.

Everything here enumerates the joint (or neighborhood) space densely, so it is
only meant for certification-sized instances. Joint tables are stored as
matrices of shape (|S|, |A|) with agent 0 as the fastest-varying digit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg

from recmarl.network_mdp import InvalidInputError, NetworkMdp, PolicyParams

DEFAULT_CAP = 10**6

GradientBundle = list  # list of per-agent arrays shaped like the logit tables


class OracleSizeError(ValueError):
    """Raised when a dense joint table would exceed the configured cap."""


@dataclass
class GlobalValue:
    V: np.ndarray  # (|S|,)
    Q: np.ndarray  # (|S|, |A|)
    pi: np.ndarray  # (|S|, |A|) joint policy

    @property
    def advantage(self) -> np.ndarray:
        return self.Q - self.V[:, None]


@dataclass
class LocalValue:
    agent: int
    neighborhood: tuple[int, ...]
    V: np.ndarray  # over flattened neighborhood joint states
    Q: np.ndarray  # (|S_N(n)|, |A_N(n)|)

    @property
    def advantage(self) -> np.ndarray:
        return self.Q - self.V[:, None]


# --- building blocks -------------------------------------------------------------

def _check_cap(n_states: int, n_actions: int, cap: int) -> None:
    entries = n_states * max(n_states, n_actions)
    if entries > cap:
        raise OracleSizeError(f"dense table with {entries} entries exceeds cap {cap}")


def _product(vectors) -> np.ndarray:
    """Outer product flattened with the first factor varying fastest."""
    return reduce(lambda acc, v: np.kron(v, acc), vectors, np.ones(1))


def local_chain(mdp: NetworkMdp, params: PolicyParams, n: int) -> np.ndarray:
    """Policy-averaged local transition matrix of agent n."""
    return np.einsum("sa,sat->st", params.probs(n), mdp.locals[n].kernel)


def _chain(mdp, params, agents) -> np.ndarray:
    return reduce(lambda acc, k: np.kron(local_chain(mdp, params, k), acc), agents, np.ones((1, 1)))


def _policy_tensor(mdp, params, agents) -> np.ndarray:
    """Product policy over ``agents`` with axes (s_k..., a_k...)."""
    K = len(agents)
    out = np.ones([1] * (2 * K))
    for i, k in enumerate(agents):
        p = params.probs(k)
        shape = [1] * (2 * K)
        shape[i], shape[K + i] = p.shape
        out = out * p.reshape(shape)
    return out


def _as_matrix(tensor: np.ndarray, K: int) -> np.ndarray:
    s = int(np.prod(tensor.shape[:K]))
    return tensor.reshape((s, -1), order="F")


def _expected_next(values: np.ndarray, kernels) -> np.ndarray:
    """E[V(s') | s, a] as a tensor with axes (s_k..., a_k...) for product kernels."""
    K = len(kernels)
    t = values
    for ker in kernels:
        t = np.tensordot(t, ker, axes=([0], [2]))
    order = list(range(0, 2 * K, 2)) + list(range(1, 2 * K, 2))
    return t.transpose(order)


def _broadcast_local(mdp: NetworkMdp, agents, table: np.ndarray) -> np.ndarray:
    """Lift a table over (s_K, a_K) to the full joint axes with singleton padding."""
    N = mdp.n_agents
    shape = [1] * (2 * N)
    for i, k in enumerate(agents):
        shape[k] = mdp.state_counts[k]
        shape[N + k] = mdp.action_counts[k]
    return table.reshape(shape)


def _broadcast_state_table(mdp: NetworkMdp, agents, table: np.ndarray) -> np.ndarray:
    shape = [1] * mdp.n_agents
    for k in agents:
        shape[k] = mdp.state_counts[k]
    return table.reshape(shape)


def joint_init_dist(mdp: NetworkMdp) -> np.ndarray:
    return _product(mdp.init_dist)


def joint_sizes(mdp: NetworkMdp) -> tuple[int, int]:
    return int(np.prod(mdp.state_counts)), int(np.prod(mdp.action_counts))


def _solve(P: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    M = np.eye(P.shape[0]) - gamma * P
    lu = linalg.lu_factor(M)
    V = linalg.lu_solve(lu, r)
    resid = np.abs(M @ V - r).max()
    assert resid <= 1e-10 * max(1.0, np.abs(V).max()), f"Bellman residual {resid:.3e}"
    return V


# --- global and local values -------------------------------------------------------

def global_reward_tensor(mdp: NetworkMdp) -> np.ndarray:
    N = mdp.n_agents
    total = np.zeros(mdp.state_counts + mdp.action_counts)
    for n in range(N):
        total = total + _broadcast_local(mdp, mdp.neighborhood(n), mdp.reward_table(n))
    return total / N


def solve_global_value(mdp: NetworkMdp, params: PolicyParams, cap: int = DEFAULT_CAP) -> GlobalValue:
    nS, nA = joint_sizes(mdp)
    _check_cap(nS, nA, cap)
    N = mdp.n_agents
    agents = list(range(N))
    pi = _as_matrix(_policy_tensor(mdp, params, agents), N)
    R = _as_matrix(global_reward_tensor(mdp), N)
    V = _solve(_chain(mdp, params, agents), (pi * R).sum(axis=1), mdp.gamma)
    nxt = _expected_next(V.reshape(mdp.state_counts, order="F"), [m.kernel for m in mdp.locals])
    Q = R + mdp.gamma * _as_matrix(nxt, N)
    return GlobalValue(V, Q, pi)


def solve_local_value(mdp: NetworkMdp, params: PolicyParams, n: int, cap: int = DEFAULT_CAP) -> LocalValue:
    """Value of r_n under the neighborhood-marginal chain, which is Markov by itself."""
    nb = mdp.neighborhood(n)
    s_shape, a_shape = mdp.neighborhood_shape(n)
    nS, nA = int(np.prod(s_shape)), int(np.prod(a_shape))
    _check_cap(nS, nA, cap)
    K = len(nb)
    pi = _as_matrix(_policy_tensor(mdp, params, nb), K)
    R = _as_matrix(mdp.reward_table(n), K)
    V = _solve(_chain(mdp, params, nb), (pi * R).sum(axis=1), mdp.gamma)
    nxt = _expected_next(V.reshape(s_shape, order="F"), [mdp.locals[k].kernel for k in nb])
    Q = R + mdp.gamma * _as_matrix(nxt, K)
    return LocalValue(n, nb, V, Q)


def solve_local_values(mdp, params, cap=DEFAULT_CAP) -> list[LocalValue]:
    return [solve_local_value(mdp, params, n, cap) for n in range(mdp.n_agents)]


def value_at(mdp: NetworkMdp, params: PolicyParams, cap: int = DEFAULT_CAP) -> float:
    """V^pi(rho) from the global solve."""
    return float(joint_init_dist(mdp) @ solve_global_value(mdp, params, cap).V)


def decomposed_value(mdp: NetworkMdp, locals_: list[LocalValue]) -> np.ndarray:
    """(1/N) sum_n V_n(s_N(n)) as a flat vector over joint states."""
    total = np.zeros(mdp.state_counts)
    for lv in locals_:
        shape = tuple(mdp.state_counts[k] for k in lv.neighborhood)
        total = total + _broadcast_state_table(mdp, lv.neighborhood, lv.V.reshape(shape, order="F"))
    return (total / mdp.n_agents).reshape(-1, order="F")


def verify_value_decomposition(mdp: NetworkMdp, params: PolicyParams, cap: int = DEFAULT_CAP) -> float:
    V = solve_global_value(mdp, params, cap).V
    return float(np.abs(V - decomposed_value(mdp, solve_local_values(mdp, params, cap))).max())


def occupancy(mdp: NetworkMdp, params: PolicyParams, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Discounted state occupancy d_rho over flattened joint states."""
    nS, nA = joint_sizes(mdp)
    _check_cap(nS, nA, cap)
    P = _chain(mdp, params, range(mdp.n_agents))
    M = np.eye(nS) - mdp.gamma * P
    x = linalg.lu_solve(linalg.lu_factor(M.T), joint_init_dist(mdp))
    return (1.0 - mdp.gamma) * x


# --- gradients -----------------------------------------------------------------------

def _score_contract(mdp, params, weights: np.ndarray, coupling) -> GradientBundle:
    """sum_{s,a} weights(s,a) * coupling_n(s,a) * dlog pi_n(a_n|s_n)/dtheta_n for every n.

    ``weights`` is (|S|, |A|); ``coupling(n)`` returns a tensor broadcastable to the
    joint (s..., a...) axes.
    """
    N = mdp.n_agents
    W = weights.reshape(mdp.state_counts + mdp.action_counts, order="F")
    grads = []
    for n in range(N):
        M = W * coupling(n)
        keep = (n, N + n)
        M = M.sum(axis=tuple(i for i in range(2 * N) if i not in keep))
        pi_n = params.probs(n)
        grads.append(M - pi_n * M.sum(axis=1, keepdims=True))
    return grads


def _local_coupling(mdp, locals_: list[LocalValue], kind: str):
    lifted = []
    for lv in locals_:
        table = lv.advantage if kind == "advantage" else lv.Q
        s_shape, a_shape = mdp.neighborhood_shape(lv.agent)
        t = table.reshape(s_shape + a_shape, order="F")
        lifted.append(_broadcast_local(mdp, lv.neighborhood, t))

    def coupling(n):
        return sum(lifted[k] for k in mdp.neighborhood(n)) / mdp.n_agents

    return coupling


def exact_gradient(mdp: NetworkMdp, params: PolicyParams, form: str = "advantage", cap: int = DEFAULT_CAP) -> GradientBundle:
    """Policy gradient of V(rho) from neighborhood-local advantages (or local Q)."""
    if form not in ("advantage", "q"):
        raise InvalidInputError("form must be 'advantage' or 'q'")
    g = solve_global_value(mdp, params, cap)
    d = occupancy(mdp, params, cap)
    coupling = _local_coupling(mdp, solve_local_values(mdp, params, cap), form)
    grads = _score_contract(mdp, params, d[:, None] * g.pi, coupling)
    return [x / (1.0 - mdp.gamma) for x in grads]


def naive_global_gradient(mdp: NetworkMdp, params: PolicyParams, cap: int = DEFAULT_CAP) -> GradientBundle:
    """Classical policy gradient using the global Q-function, no decomposition."""
    g = solve_global_value(mdp, params, cap)
    d = occupancy(mdp, params, cap)
    N = mdp.n_agents
    Qt = g.Q.reshape(mdp.state_counts + mdp.action_counts, order="F")
    grads = _score_contract(mdp, params, d[:, None] * g.pi, lambda n: Qt)
    return [x / (1.0 - mdp.gamma) for x in grads]


def truncated_gradient(mdp: NetworkMdp, params: PolicyParams, horizon: int, cap: int = DEFAULT_CAP) -> GradientBundle:
    """Expectation of the H-step TD-error gradient estimate when critics are exact.

    Weights step h = 1..H by gamma**h with s(1) ~ rho, and keeps the 1/(1-gamma)
    prefactor of the actor-critic estimator.
    """
    g = solve_global_value(mdp, params, cap)
    P = _chain(mdp, params, range(mdp.n_agents))
    p = joint_init_dist(mdp)
    D = np.zeros_like(p)
    for h in range(1, horizon + 1):
        D += mdp.gamma**h * p
        p = p @ P
    coupling = _local_coupling(mdp, solve_local_values(mdp, params, cap), "advantage")
    grads = _score_contract(mdp, params, D[:, None] * g.pi, coupling)
    return [x / (1.0 - mdp.gamma) for x in grads]


def fd_gradient(mdp: NetworkMdp, params: PolicyParams, h: float = 1e-5, objective=None, cap: int = DEFAULT_CAP) -> GradientBundle:
    """Central finite differences of ``objective`` (default V(rho)) per logit."""
    if not 1e-7 <= h <= 1e-3:
        raise InvalidInputError("finite-difference step must lie in [1e-7, 1e-3]")
    f = objective or (lambda p: value_at(mdp, p, cap))
    grads = []
    for n, table in enumerate(params.tables):
        g = np.zeros_like(table)
        for idx in np.ndindex(table.shape):
            plus, minus = params.copy(), params.copy()
            plus.tables[n][idx] += h
            minus.tables[n][idx] -= h
            g[idx] = (f(plus) - f(minus)) / (2 * h)
        grads.append(g)
    return grads


def regularizer(mdp: NetworkMdp, params: PolicyParams, lam: float) -> float:
    total = 0.0
    for n, m in enumerate(mdp.locals):
        total += lam / (m.state_count * m.action_count) * np.log(params.probs(n)).sum()
    return float(total)


def regularizer_gradient(mdp: NetworkMdp, params: PolicyParams, lam: float) -> GradientBundle:
    return [
        lam / m.state_count * (1.0 / m.action_count - params.probs(n))
        for n, m in enumerate(mdp.locals)
    ]


def regularized_objective(mdp: NetworkMdp, params: PolicyParams, lam: float, cap: int = DEFAULT_CAP) -> float:
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    return value_at(mdp, params, cap) + regularizer(mdp, params, lam)


def exact_regularized_gradient(mdp: NetworkMdp, params: PolicyParams, lam: float, cap: int = DEFAULT_CAP) -> GradientBundle:
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    return [g + r for g, r in zip(exact_gradient(mdp, params, cap=cap), regularizer_gradient(mdp, params, lam))]


def bundle_norm(bundle: GradientBundle) -> float:
    return float(np.sqrt(sum(float((g**2).sum()) for g in bundle)))


def smoothness_constant(mdp: NetworkMdp, lam: float = 0.0) -> float:
    """48 N^2 / (1-gamma)^3 + sum_n 2 lambda / |S_n|."""
    N = mdp.n_agents
    return 48 * N**2 / (1 - mdp.gamma) ** 3 + sum(2 * lam / s for s in mdp.state_counts)


# --- optimal control -------------------------------------------------------------

@dataclass
class OptimalSolution:
    V: np.ndarray  # V*(s) over joint states
    actions: np.ndarray  # greedy joint action per joint state, shape (|S|, N)
    value: float  # V*(rho)


def _joint_row(mdp: NetworkMdp, s, a) -> np.ndarray:
    return _product([m.kernel[s[n], a[n]] for n, m in enumerate(mdp.locals)])


def joint_policy_iteration(mdp: NetworkMdp, cap: int = DEFAULT_CAP, max_iter: int = 1000) -> OptimalSolution:
    """Optimal centralized policy of the joint MDP by Howard policy iteration."""
    nS, nA = joint_sizes(mdp)
    _check_cap(nS, nA, cap)
    N = mdp.n_agents
    R = _as_matrix(global_reward_tensor(mdp), N)
    states = [np.array(np.unravel_index(i, mdp.state_counts, order="F")) for i in range(nS)]
    a_idx = np.zeros(nS, dtype=np.int64)
    kernels = [m.kernel for m in mdp.locals]
    for _ in range(max_iter):
        acts = [np.array(np.unravel_index(a_idx[i], mdp.action_counts, order="F")) for i in range(nS)]
        P = np.stack([_joint_row(mdp, states[i], acts[i]) for i in range(nS)])
        V = _solve(P, R[np.arange(nS), a_idx], mdp.gamma)
        Q = R + mdp.gamma * _as_matrix(_expected_next(V.reshape(mdp.state_counts, order="F"), kernels), N)
        best = Q.max(axis=1)
        # keep the incumbent action unless another is strictly better
        improve = best > Q[np.arange(nS), a_idx] + 1e-12
        if not improve.any():
            break
        a_idx = np.where(improve, Q.argmax(axis=1), a_idx)
    actions = np.stack([np.unravel_index(a_idx[i], mdp.action_counts, order="F") for i in range(nS)])
    return OptimalSolution(V, actions, float(joint_init_dist(mdp) @ V))


def is_locally_realizable(mdp: NetworkMdp, solution: OptimalSolution, tol: float = 1e-9) -> bool:
    """True when some product of deterministic local policies attains V*(rho)."""
    return best_local_deterministic(mdp)[1] >= solution.value - tol


def best_local_deterministic(mdp: NetworkMdp, cap: int = DEFAULT_CAP) -> tuple[list[np.ndarray], float]:
    """Enumerate deterministic local policies; return the best and its V(rho)."""
    choices = [itertools.product(range(m.action_count), repeat=m.state_count) for m in mdp.locals]
    best, best_val = None, -np.inf
    for combo in itertools.product(*[list(c) for c in choices]):
        params = deterministic_params(mdp, combo)
        val = value_at(mdp, params, cap)
        if val > best_val:
            best, best_val = [np.array(c) for c in combo], val
    return best, best_val


def deterministic_params(mdp: NetworkMdp, actions_per_agent, sharpness: float = 60.0) -> PolicyParams:
    """Logits that put essentially all mass on the given local actions."""
    tables = []
    for m, acts in zip(mdp.locals, actions_per_agent):
        t = np.zeros((m.state_count, m.action_count))
        t[np.arange(m.state_count), np.asarray(acts)] = sharpness
        tables.append(t)
    return PolicyParams(tables)


def optimal_action_prob(mdp: NetworkMdp, params: PolicyParams, solution: OptimalSolution) -> float:
    """min_s pi_theta(a*(s)|s) for the joint optimal action map."""
    nS = solution.actions.shape[0]
    probs = params.all_probs()
    out = np.ones(nS)
    for i in range(nS):
        s = np.unravel_index(i, mdp.state_counts, order="F")
        for n in range(mdp.n_agents):
            out[i] *= probs[n][s[n], solution.actions[i, n]]
    return float(out.min())
