"""Random small REC-MARL instances for certification runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from recmarl.network_mdp import InteractionGraph, LocalMdp, NetworkMdp, PolicyParams, TabularReward


def line_edges(n: int):
    return [(i, i + 1) for i in range(n - 1)]


def star_edges(n: int):
    return [(0, i) for i in range(1, n)]


def cycle_edges(n: int):
    return line_edges(n) + ([(n - 1, 0)] if n > 2 else [])


def complete_edges(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


GRAPHS = {"line": line_edges, "star": star_edges, "cycle": cycle_edges, "complete": complete_edges}


def random_network_mdp(
    rng: np.random.Generator,
    edges,
    n_agents: int,
    state_counts,
    action_counts,
    gamma: float,
    random_init: bool = True,
) -> NetworkMdp:
    graph = InteractionGraph.from_edges(n_agents, edges)
    locals_ = [LocalMdp(rng.dirichlet(np.ones(S), size=(S, A))) for S, A in zip(state_counts, action_counts)]
    rewards = []
    for n in range(n_agents):
        nb = graph.neighborhood(n)
        shape = tuple(state_counts[k] for k in nb) + tuple(action_counts[k] for k in nb)
        rewards.append(TabularReward(rng.uniform(0.0, 1.0, size=shape)))
    init = None
    if random_init:
        init = []
        for S in state_counts:
            d = rng.dirichlet(np.ones(S)) + 0.05
            init.append(d / d.sum())
    return NetworkMdp(graph, locals_, rewards, gamma, init)


@dataclass
class Instance:
    label: str
    mdp: NetworkMdp
    params: PolicyParams


def certification_instances(count: int, seed: int = 0) -> Iterator[Instance]:
    """Cycle through graph kinds x N in {2,3,4} x |S|,|A| in {2,3} x gamma in {0.5,0.9}."""
    rng = np.random.default_rng(seed)
    kinds = ["line", "star", "cycle"]
    for i in range(count):
        kind = kinds[i % 3]
        N = 2 + (i // 3) % 3
        gamma = (0.5, 0.9)[(i // 9) % 2]
        states = [int(x) for x in rng.integers(2, 4, size=N)]
        actions = [int(x) for x in rng.integers(2, 4, size=N)]
        if N == 4:
            # keep the dense joint tables of the largest networks moderate
            states = [2 + (i // 18) % 2] * N
        mdp = random_network_mdp(rng, GRAPHS[kind](N), N, states, actions, gamma)
        params = PolicyParams.random(mdp, rng)
        yield Instance(f"{kind}-N{N}-S{states}-A{actions}-g{gamma}", mdp, params)


def cooperative_pair(gamma: float = 0.9) -> NetworkMdp:
    """Two coupled agents whose joint optimum is a product of local policies.

    Action 1 pushes an agent toward state 1 at a small reward cost; each agent
    earns 0.5 s_n + 0.3 s_0 s_1 + 0.1 [a_n = 0]. Acting 1 everywhere is optimal.
    """
    P = np.zeros((2, 2, 2))
    P[:, 1] = (0.2, 0.8)
    P[:, 0] = (0.7, 0.3)
    P[1, 0] = (0.4, 0.6)
    s_me, s_other, a_me, _ = np.indices((2, 2, 2, 2))
    mine = 0.5 * s_me + 0.3 * s_me * s_other + 0.1 * (1 - a_me)
    theirs = np.transpose(mine, (1, 0, 3, 2))
    graph = InteractionGraph.from_edges(2, [(0, 1)])
    return NetworkMdp(graph, [LocalMdp(P), LocalMdp(P)], [TabularReward(mine), TabularReward(theirs)], gamma)
