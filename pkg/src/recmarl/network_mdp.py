"""Reward-coupled networked MDPs: graph, local kernels, softmax policies, sampling.

Joint states and actions are integer vectors with one coordinate per agent.
Whenever a joint space is flattened, agent 0 is the least-significant digit
(numpy ``order="F"`` over axes ordered by agent).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from recmarl import _kernels


class InvalidInputError(ValueError):
    """Raised on malformed model inputs (non-finite logits, bad distributions)."""


class BoundsError(IndexError):
    """Raised when a state/action coordinate is outside its agent's space."""


# A local reward receives neighborhood states and actions, both with last axis
# ordered like ``graph.neighborhood(n)``, and returns one reward per leading index.
LocalReward = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InteractionGraph:
    node_count: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.node_count < 1:
            raise InvalidInputError("node_count must be positive")
        norm = set()
        for e in self.edges:
            m, n = tuple(e)
            if not (0 <= m < self.node_count and 0 <= n < self.node_count):
                raise InvalidInputError(f"edge {(m, n)} references an unknown agent")
            if m != n:
                norm.add((min(m, n), max(m, n)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, node_count: int, edges) -> "InteractionGraph":
        return cls(node_count, frozenset(tuple(e) for e in edges))

    @cached_property
    def _neighborhoods(self) -> tuple[tuple[int, ...], ...]:
        nb = [{n} for n in range(self.node_count)]
        for m, n in self.edges:
            nb[m].add(n)
            nb[n].add(m)
        return tuple(tuple(sorted(s)) for s in nb)

    def neighborhood(self, n: int) -> tuple[int, ...]:
        """Closed neighborhood of ``n`` (includes ``n``), sorted ascending."""
        return self._neighborhoods[n]

    def are_neighbors(self, m: int, n: int) -> bool:
        return m in self._neighborhoods[n]


@dataclass(frozen=True)
class LocalMdp:
    kernel: np.ndarray  # (|S_n|, |A_n|, |S_n|), rows sum to one

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 3 or k.shape[0] != k.shape[2]:
            raise InvalidInputError(f"kernel must have shape (S, A, S), got {k.shape}")
        if np.any(k < 0) or not np.allclose(k.sum(axis=2), 1.0, rtol=0, atol=1e-12):
            raise InvalidInputError("kernel rows must be probability vectors")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def state_count(self) -> int:
        return self.kernel.shape[0]

    @property
    def action_count(self) -> int:
        return self.kernel.shape[1]


class TabularReward:
    """Reward given by a dense table over (neighborhood states, neighborhood actions)."""

    def __init__(self, table: np.ndarray):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim % 2:
            raise InvalidInputError("reward table needs one state and one action axis per neighbor")

    def __call__(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        actions = np.asarray(actions)
        idx = tuple(np.moveaxis(states, -1, 0)) + tuple(np.moveaxis(actions, -1, 0))
        return self.table[idx]


@dataclass(frozen=True, eq=False)
class NetworkMdp:
    graph: InteractionGraph
    locals: tuple[LocalMdp, ...]
    rewards: tuple[LocalReward, ...]
    gamma: float
    init_dist: tuple[np.ndarray, ...] | None = None
    # per-agent bound on |r_n|; computed from the reward on demand when omitted
    reward_bounds: tuple[float, ...] | None = None

    def __post_init__(self):
        N = self.graph.node_count
        object.__setattr__(self, "locals", tuple(self.locals))
        object.__setattr__(self, "rewards", tuple(self.rewards))
        if len(self.locals) != N or len(self.rewards) != N:
            raise InvalidInputError("need one local MDP and one reward per agent")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidInputError("gamma must lie in [0, 1)")
        if self.init_dist is None:
            dist = tuple(np.full(m.state_count, 1.0 / m.state_count) for m in self.locals)
        else:
            dist = tuple(np.asarray(d, dtype=float) for d in self.init_dist)
        if len(dist) != N:
            raise InvalidInputError("need one initial distribution per agent")
        for m, d in zip(self.locals, dist):
            if d.shape != (m.state_count,) or abs(d.sum() - 1.0) > 1e-12:
                raise InvalidInputError("initial distribution must be a probability vector")
            if np.any(d <= 0):
                raise InvalidInputError("initial distribution must be strictly positive")
        object.__setattr__(self, "init_dist", dist)

    @property
    def n_agents(self) -> int:
        return self.graph.node_count

    @property
    def state_counts(self) -> tuple[int, ...]:
        return tuple(m.state_count for m in self.locals)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(m.action_count for m in self.locals)

    def neighborhood(self, n: int) -> tuple[int, ...]:
        return self.graph.neighborhood(n)

    def neighborhood_shape(self, n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        nb = self.neighborhood(n)
        return (tuple(self.state_counts[k] for k in nb), tuple(self.action_counts[k] for k in nb))

    def reward_table(self, n: int) -> np.ndarray:
        """Dense r_n over the neighborhood grid, axes (s_k for k in N(n)) + (a_k for k in N(n))."""
        cache = self.__dict__.setdefault("_reward_tables", {})
        if n not in cache:
            s_shape, a_shape = self.neighborhood_shape(n)
            grid = np.indices(s_shape + a_shape)
            K = len(s_shape)
            states = np.moveaxis(grid[:K], 0, -1)
            actions = np.moveaxis(grid[K:], 0, -1)
            cache[n] = np.asarray(self.rewards[n](states, actions), dtype=float)
        return cache[n]

    def reward_bound(self, n: int) -> float:
        if self.reward_bounds is not None:
            return float(self.reward_bounds[n])
        return float(np.abs(self.reward_table(n)).max())

    @cached_property
    def _padded(self):
        # padded cumulative tables for the compiled samplers
        N = self.n_agents
        S, A = max(self.state_counts), max(self.action_counts)
        kern = np.ones((N, S, A, S))
        init = np.ones((N, S))
        for n, m in enumerate(self.locals):
            c = np.cumsum(m.kernel, axis=2)
            c[..., -1] = 1.0
            kern[n, : m.state_count, : m.action_count, : m.state_count] = c
            ci = np.cumsum(self.init_dist[n])
            ci[-1] = 1.0
            init[n, : m.state_count] = ci
        return kern, init


@dataclass
class PolicyParams:
    tables: list[np.ndarray]

    def __post_init__(self):
        self.tables = [np.array(t, dtype=float) for t in self.tables]
        for t in self.tables:
            if t.ndim != 2:
                raise InvalidInputError("each logit table must be 2-D (states, actions)")
            if not np.all(np.isfinite(t)):
                raise InvalidInputError("logits must be finite")

    @classmethod
    def zeros(cls, mdp: NetworkMdp) -> "PolicyParams":
        return cls([np.zeros((m.state_count, m.action_count)) for m in mdp.locals])

    @classmethod
    def random(cls, mdp: NetworkMdp, rng: np.random.Generator, scale: float = 1.0) -> "PolicyParams":
        return cls([scale * rng.standard_normal((m.state_count, m.action_count)) for m in mdp.locals])

    def copy(self) -> "PolicyParams":
        return PolicyParams([t.copy() for t in self.tables])

    def probs(self, n: int) -> np.ndarray:
        return softmax_rows(self.tables[n])

    def all_probs(self) -> list[np.ndarray]:
        return [softmax_rows(t) for t in self.tables]

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tables])


@dataclass
class Trajectory:
    """One shared network rollout: H transitions plus the terminal joint state.

    ``states[h]`` is s(h+1) and ``actions[h]``/``rewards[h]`` are a(h+1), r(h+1)
    in the one-based step numbering used by the learners.
    """

    states: np.ndarray  # (H + 1, N)
    actions: np.ndarray  # (H, N)
    rewards: np.ndarray  # (H, N)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_probs(logits: Sequence[float]) -> np.ndarray:
    """Softmax over one logit row (one local state)."""
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise InvalidInputError("expected a non-empty 1-D logit row")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits must be finite")
    return softmax_rows(z)


def _check_joint(mdp: NetworkMdp, s, a=None) -> tuple[np.ndarray, np.ndarray | None]:
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (mdp.n_agents,):
        raise BoundsError(f"joint state must have {mdp.n_agents} coordinates")
    if np.any(s < 0) or np.any(s >= np.asarray(mdp.state_counts)):
        raise BoundsError(f"joint state {s.tolist()} out of range")
    if a is not None:
        a = np.asarray(a, dtype=np.int64)
        if a.shape != (mdp.n_agents,):
            raise BoundsError(f"joint action must have {mdp.n_agents} coordinates")
        if np.any(a < 0) or np.any(a >= np.asarray(mdp.action_counts)):
            raise BoundsError(f"joint action {a.tolist()} out of range")
    return s, a


def joint_policy_prob(mdp: NetworkMdp, params: PolicyParams, s, a) -> float:
    s, a = _check_joint(mdp, s, a)
    p = 1.0
    for n in range(mdp.n_agents):
        p *= params.probs(n)[s[n], a[n]]
    return float(p)


def local_rewards(mdp: NetworkMdp, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Per-agent rewards for a batch of joint (state, action) rows, shape (..., N)."""
    states = np.asarray(states)
    actions = np.asarray(actions)
    out = np.empty(states.shape[:-1] + (mdp.n_agents,))
    for n in range(mdp.n_agents):
        nb = list(mdp.neighborhood(n))
        out[..., n] = mdp.rewards[n](states[..., nb], actions[..., nb])
    return out


def global_reward(mdp: NetworkMdp, s, a) -> float:
    s, a = _check_joint(mdp, s, a)
    return float(local_rewards(mdp, s, a).mean())


def step(mdp: NetworkMdp, s, a, rng: np.random.Generator) -> np.ndarray:
    """Sample the next joint state; each coordinate uses its own local kernel row."""
    s, a = _check_joint(mdp, s, a)
    u = rng.random(mdp.n_agents)
    nxt = np.empty(mdp.n_agents, dtype=np.int64)
    for n, m in enumerate(mdp.locals):
        row = np.cumsum(m.kernel[s[n], a[n]])
        nxt[n] = min(int(np.searchsorted(row, u[n], side="right")), m.state_count - 1)
    return nxt


def sample_initial_state(mdp: NetworkMdp, rng: np.random.Generator) -> np.ndarray:
    _, init = mdp._padded
    return _kernels.sample_rows(init, rng.random(mdp.n_agents))


def padded_policy_cdf(mdp: NetworkMdp, params: PolicyParams) -> np.ndarray:
    return _padded_cdf(mdp, params.all_probs())


def _padded_cdf(mdp: NetworkMdp, prob_tables) -> np.ndarray:
    S, A = max(mdp.state_counts), max(mdp.action_counts)
    cdf = np.ones((mdp.n_agents, S, A))
    for n, p in enumerate(prob_tables):
        c = np.cumsum(p, axis=1)
        c[:, -1] = 1.0
        cdf[n, : p.shape[0], : p.shape[1]] = c
    return cdf


def rollout(mdp: NetworkMdp, params: PolicyParams, horizon: int, rng: np.random.Generator) -> Trajectory:
    """Run the joint chain for ``horizon`` transitions from s(1) ~ init_dist."""
    return _rollout(mdp, padded_policy_cdf(mdp, params), horizon, rng)


def rollout_probs(mdp: NetworkMdp, prob_tables, horizon: int, rng: np.random.Generator) -> Trajectory:
    """Like :func:`rollout` but with explicit per-agent (S_n, A_n) action distributions."""
    for n, (p, m) in enumerate(zip(prob_tables, mdp.locals)):
        p = np.asarray(p)
        if p.shape != (m.state_count, m.action_count):
            raise InvalidInputError(f"agent {n}: policy table has shape {p.shape}")
        if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0):
            raise InvalidInputError(f"agent {n}: policy rows must be distributions")
    return _rollout(mdp, _padded_cdf(mdp, [np.asarray(p, float) for p in prob_tables]), horizon, rng)


def _rollout(mdp: NetworkMdp, policy_cdf: np.ndarray, horizon: int, rng: np.random.Generator) -> Trajectory:
    if horizon < 1:
        raise InvalidInputError("horizon must be at least 1")
    N = mdp.n_agents
    kern, _ = mdp._padded
    s0 = sample_initial_state(mdp, rng)
    u_act = rng.random((horizon, N))
    u_next = rng.random((horizon, N))
    states, actions = _kernels.sample_chain(policy_cdf, kern, s0, u_act, u_next)
    rewards = local_rewards(mdp, states[:-1], actions)
    return Trajectory(states, actions, rewards)


# --- mixed-radix helpers -------------------------------------------------------

def encode(coords, radices) -> int:
    """Flatten coordinates with the first coordinate as the least-significant digit."""
    idx, stride = 0, 1
    for c, r in zip(coords, radices):
        idx += int(c) * stride
        stride *= int(r)
    return idx


def decode(index: int, radices) -> tuple[int, ...]:
    out = []
    for r in radices:
        out.append(index % r)
        index //= r
    return tuple(out)


def strides(radices) -> np.ndarray:
    return np.concatenate([[1], np.cumprod(radices[:-1])]).astype(np.int64) if len(radices) else np.zeros(0, np.int64)
