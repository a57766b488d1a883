from recmarl.environments.access import (
    AccessConfig,
    AccessConfigError,
    InvalidActionError,
    access_kernel,
    access_realized_reward,
    access_reward,
    access_transition,
    build_access_mdp,
    decode_queue,
    encode_queue,
)
from recmarl.environments.power import (
    POWER_DELTAS,
    PowerConfig,
    PowerConfigError,
    build_power_mdp,
    power_kernel,
    power_reward,
    power_transition,
)
from recmarl.environments import topology

# Experiment constants reported for the 6-node line access network.
LINE_ARRIVALS = (0.5, 0.3, 0.5, 0.5, 0.3, 0.5)
LINE_Q_RELIABLE = (0.9, 0.95, 0.9, 0.95, 0.9)
LINE_Q_UNRELIABLE = (0.5, 0.6, 0.7, 0.6, 0.5)


def build_network_mdp(cfg, gamma: float = 0.9, init_dist=None):
    if isinstance(cfg, AccessConfig):
        return build_access_mdp(cfg, gamma, init_dist)
    if isinstance(cfg, PowerConfig):
        return build_power_mdp(cfg, gamma, init_dist)
    raise TypeError(f"unsupported environment config {type(cfg).__name__}")


def access_line(arrival_prob=LINE_ARRIVALS, success_prob=LINE_Q_RELIABLE, deadline=2, normalize="none") -> AccessConfig:
    n = len(arrival_prob)
    return AccessConfig(
        availability=topology.line_availability(n),
        arrival_prob=arrival_prob,
        success_prob=success_prob,
        deadline=deadline,
        normalize=normalize,
    )


def access_grid(rows, cols, arrival_prob, success_prob, deadline=2, normalize="none") -> AccessConfig:
    return AccessConfig(
        availability=topology.grid_availability(rows, cols),
        arrival_prob=arrival_prob,
        success_prob=success_prob,
        deadline=deadline,
        normalize=normalize,
    )


def power_grid(rows=2, cols=3, spacing=1.0, **kwargs) -> PowerConfig:
    return PowerConfig(
        positions=topology.grid_positions(rows, cols, spacing),
        edges=topology.grid_edges(rows, cols),
        **kwargs,
    )
