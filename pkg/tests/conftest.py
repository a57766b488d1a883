import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from recmarl.instances import line_edges, random_network_mdp
from recmarl.network_mdp import InteractionGraph, LocalMdp, NetworkMdp, PolicyParams, TabularReward

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def constant_reward_mdp(value, n_agents=2, states=2, actions=2, gamma=0.9, edges=None, kernel=None, seed=0):
    """Every local reward equals ``value`` whatever happens."""
    rng = np.random.default_rng(seed)
    edges = line_edges(n_agents) if edges is None else edges
    graph = InteractionGraph.from_edges(n_agents, edges)
    locals_, rewards = [], []
    for n in range(n_agents):
        k = rng.dirichlet(np.ones(states), size=(states, actions)) if kernel is None else kernel
        locals_.append(LocalMdp(k))
        nb = graph.neighborhood(n)
        rewards.append(TabularReward(np.full((states,) * len(nb) + (actions,) * len(nb), float(value))))
    return NetworkMdp(graph, locals_, rewards, gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pair(rng):
    """Random 2-agent instance with |S_n| = |A_n| = 2 and a random policy."""
    mdp = random_network_mdp(rng, [(0, 1)], 2, [2, 2], [2, 2], 0.9)
    return mdp, PolicyParams.random(mdp, rng)


@pytest.fixture
def line3(rng):
    """Random 3-agent line with mixed state and action counts."""
    mdp = random_network_mdp(rng, line_edges(3), 3, [2, 3, 2], [3, 2, 2], 0.8)
    return mdp, PolicyParams.random(mdp, rng)
