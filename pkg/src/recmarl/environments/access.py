"""Real-time wireless access control with packet deadlines.

Node state is a bit-vector of deadline buckets: bit ``l-1`` of the state index is
set when a packet with remaining lifetime ``l`` is queued. Action 0 is silence and
action ``i >= 1`` transmits the earliest-deadline packet to the i-th reachable AP.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from recmarl.network_mdp import InteractionGraph, LocalMdp, NetworkMdp

SILENT = -1


class InvalidActionError(ValueError):
    pass


class AccessConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AccessConfig:
    availability: tuple[tuple[int, ...], ...]  # AP(n) for every node
    arrival_prob: tuple[float, ...]  # w_n
    success_prob: tuple[float, ...]  # q_m
    deadline: int = 2
    edges: tuple[tuple[int, int], ...] | None = None  # default: nodes sharing an AP
    # "arrivals" rescales every r_n by N / sum(w) so the network reward is the
    # fraction of arriving packets that get delivered
    normalize: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "availability", tuple(tuple(int(m) for m in aps) for aps in self.availability))
        object.__setattr__(self, "arrival_prob", tuple(float(w) for w in self.arrival_prob))
        object.__setattr__(self, "success_prob", tuple(float(q) for q in self.success_prob))
        if self.edges is not None:
            object.__setattr__(self, "edges", tuple(tuple(int(x) for x in e) for e in self.edges))
        N, M = self.node_count, self.ap_count
        if N < 1:
            raise AccessConfigError("need at least one node")
        if len(self.arrival_prob) != N:
            raise AccessConfigError(f"arrival_prob has {len(self.arrival_prob)} entries for {N} nodes")
        for n, aps in enumerate(self.availability):
            if not aps:
                raise AccessConfigError(f"node {n} has no reachable access point")
            if any(not 0 <= m < M for m in aps) or len(set(aps)) != len(aps):
                raise AccessConfigError(f"node {n} lists invalid access points {aps}")
        for name, vals in (("arrival_prob", self.arrival_prob), ("success_prob", self.success_prob)):
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise AccessConfigError(f"{name} entries must lie in [0, 1]")
        if self.deadline < 1:
            raise AccessConfigError("deadline must be a positive integer")
        if self.normalize not in ("none", "arrivals"):
            raise AccessConfigError("normalize must be 'none' or 'arrivals'")
        if self.normalize == "arrivals" and sum(self.arrival_prob) <= 0:
            raise AccessConfigError("arrival normalization needs a positive total arrival rate")

    @property
    def node_count(self) -> int:
        return len(self.availability)

    @property
    def ap_count(self) -> int:
        return len(self.success_prob)

    @property
    def state_count(self) -> int:
        return 2**self.deadline

    @cached_property
    def graph(self) -> InteractionGraph:
        if self.edges is not None:
            return InteractionGraph.from_edges(self.node_count, self.edges)
        edges = [
            (m, n)
            for m in range(self.node_count)
            for n in range(m + 1, self.node_count)
            if set(self.availability[m]) & set(self.availability[n])
        ]
        return InteractionGraph.from_edges(self.node_count, edges)

    @cached_property
    def contenders(self) -> np.ndarray:
        """Number of nodes able to reach each access point."""
        c = np.zeros(self.ap_count, dtype=np.int64)
        for aps in self.availability:
            c[list(aps)] += 1
        return c

    @property
    def reward_scale(self) -> float:
        if self.normalize == "arrivals":
            return self.node_count / sum(self.arrival_prob)
        return 1.0

    def action_to_ap(self, n: int) -> np.ndarray:
        return np.array((SILENT,) + self.availability[n], dtype=np.int64)


def encode_queue(bits) -> int:
    """(Q^1, ..., Q^d) -> state index."""
    return int(sum(int(b) << l for l, b in enumerate(bits)))


def decode_queue(state: int, deadline: int) -> tuple[int, ...]:
    return tuple((state >> l) & 1 for l in range(deadline))


def _after_service(state: int, transmit: bool) -> int:
    """Remove the earliest-deadline packet if transmitting, then age every packet."""
    if transmit and state:
        state &= state - 1
    return state >> 1


def _throughput(q: np.ndarray, aps: np.ndarray, me: int) -> np.ndarray:
    """Expected delivery for neighborhood member ``me`` given effective AP choices."""
    mine = aps[..., me]
    clear = np.ones(mine.shape, dtype=bool)
    for k in range(aps.shape[-1]):
        if k != me:
            clear &= aps[..., k] != mine
    qm = np.where(mine >= 0, q[np.maximum(mine, 0)], 0.0)
    return np.where((mine >= 0) & clear, qm, 0.0)


def access_reward(cfg: AccessConfig, n: int, queue_states, ap_choices) -> float:
    """Expected throughput of node n; inputs are ordered like its neighborhood.

    ``ap_choices`` holds an AP id per neighbor or -1 for silence. Transmissions
    from empty queues are treated as silence.
    """
    nb = cfg.graph.neighborhood(n)
    queue_states = np.asarray(queue_states, dtype=np.int64)
    aps = np.asarray(ap_choices, dtype=np.int64)
    if queue_states.shape != (len(nb),) or aps.shape != (len(nb),):
        raise InvalidActionError(f"expected {len(nb)} neighborhood entries")
    for k, m in zip(nb, aps):
        if m != SILENT and m not in cfg.availability[k]:
            raise InvalidActionError(f"node {k} cannot reach access point {m}")
    aps = np.where(queue_states > 0, aps, SILENT)
    return float(_throughput(np.asarray(cfg.success_prob), aps, nb.index(n)))


def access_realized_reward(cfg: AccessConfig, n: int, queue_states, ap_choices, rng: np.random.Generator) -> int:
    """1 if the packet gets through (no collision and channel success), else 0."""
    p = access_reward(cfg, n, queue_states, ap_choices)
    return int(rng.random() < p)


def access_transition(cfg: AccessConfig, n: int, state: int, ap_choice: int, rng: np.random.Generator) -> int:
    if ap_choice != SILENT and ap_choice not in cfg.availability[n]:
        raise InvalidActionError(f"node {n} cannot reach access point {ap_choice}")
    nxt = _after_service(int(state), ap_choice != SILENT)
    if rng.random() < cfg.arrival_prob[n]:
        nxt |= 1 << (cfg.deadline - 1)
    return nxt


def access_kernel(cfg: AccessConfig, n: int) -> np.ndarray:
    S = cfg.state_count
    A = len(cfg.availability[n]) + 1
    w = cfg.arrival_prob[n]
    P = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            base = _after_service(s, a > 0)
            P[s, a, base] += 1.0 - w
            P[s, a, base | (1 << (cfg.deadline - 1))] += w
    return P


class AccessReward:
    """Expected throughput of one node as a function of neighborhood indices."""

    def __init__(self, cfg: AccessConfig, n: int):
        self.nb = cfg.graph.neighborhood(n)
        self.me = self.nb.index(n)
        self.q = np.asarray(cfg.success_prob)
        self.scale = cfg.reward_scale
        width = max(len(cfg.availability[k]) for k in self.nb) + 1
        self.lookup = np.full((len(self.nb), width), SILENT, dtype=np.int64)
        for i, k in enumerate(self.nb):
            row = cfg.action_to_ap(k)
            self.lookup[i, : len(row)] = row

    def __call__(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        actions = np.asarray(actions)
        aps = self.lookup[np.arange(len(self.nb)), actions]
        aps = np.where(states > 0, aps, SILENT)
        return self.scale * _throughput(self.q, aps, self.me)


def build_access_mdp(cfg: AccessConfig, gamma: float = 0.9, init_dist=None) -> NetworkMdp:
    locals_ = [LocalMdp(access_kernel(cfg, n)) for n in range(cfg.node_count)]
    rewards = [AccessReward(cfg, n) for n in range(cfg.node_count)]
    bound = max(cfg.success_prob) * cfg.reward_scale
    return NetworkMdp(cfg.graph, locals_, rewards, gamma, init_dist, tuple([bound] * cfg.node_count))
