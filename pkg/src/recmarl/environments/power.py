"""Distributed power control: rate minus linear power price on an interference graph.

Link state is its integer power level in 0..p_max. Actions are indexed in the
order (keep, decrease, increase), i.e. deltas ``POWER_DELTAS = (0, -1, +1)``;
moves past either boundary clamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from recmarl.network_mdp import InteractionGraph, LocalMdp, NetworkMdp

POWER_DELTAS = (0, -1, 1)


class PowerConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PowerConfig:
    positions: tuple[tuple[float, float], ...]
    edges: tuple[tuple[int, int], ...]
    p_max: int = 5
    kappa: float = 0.1
    sigma: tuple[float, ...] | float = 0.1
    price: tuple[float, ...] | float = 0.1
    # affine map of rewards onto [0, 1] using the per-link reward range
    normalize: bool = False

    def __post_init__(self):
        pos = tuple(tuple(float(x) for x in p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "edges", tuple(tuple(int(x) for x in e) for e in self.edges))
        N = len(pos)
        for name in ("sigma", "price"):
            v = getattr(self, name)
            v = (float(v),) * N if np.isscalar(v) else tuple(float(x) for x in v)
            if len(v) != N:
                raise PowerConfigError(f"{name} needs {N} entries")
            object.__setattr__(self, name, v)
        if N < 1:
            raise PowerConfigError("need at least one link")
        if int(self.p_max) != self.p_max or self.p_max < 1:
            raise PowerConfigError("p_max must be a positive integer")
        if any(s <= 0 for s in self.sigma):
            raise PowerConfigError("noise power must be positive")
        if any(u < 0 for u in self.price):
            raise PowerConfigError("price must be non-negative")
        if self.kappa < 0:
            raise PowerConfigError("kappa must be non-negative")
        for m, n in self.edges:
            if not (0 <= m < N and 0 <= n < N):
                raise PowerConfigError(f"edge {(m, n)} references an unknown link")
            if m != n and np.allclose(pos[m], pos[n]):
                raise PowerConfigError(f"links {m} and {n} are linked but co-located")

    @property
    def link_count(self) -> int:
        return len(self.positions)

    @cached_property
    def graph(self) -> InteractionGraph:
        return InteractionGraph.from_edges(self.link_count, self.edges)

    @cached_property
    def gains(self) -> np.ndarray:
        """G[m, n]: gain from transmitter m to receiver n."""
        pos = np.asarray(self.positions)
        d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
        G = np.ones_like(d2)
        off = ~np.eye(len(pos), dtype=bool)
        with np.errstate(divide="ignore"):
            G[off] = self.kappa / d2[off]
        return G

    def reward_range(self, n: int) -> tuple[float, float]:
        lo = -self.price[n] * self.p_max
        hi = np.log1p(self.p_max * self.gains[n, n] / self.sigma[n])
        return float(lo), float(hi)


def _rate_minus_cost(cfg: PowerConfig, n: int, nb, powers: np.ndarray) -> np.ndarray:
    me = nb.index(n)
    interference = np.zeros(powers.shape[:-1])
    for i, m in enumerate(nb):
        if m != n:
            interference = interference + powers[..., i] * cfg.gains[m, n]
    p = powers[..., me]
    return np.log1p(p * cfg.gains[n, n] / (interference + cfg.sigma[n])) - cfg.price[n] * p


def power_reward(cfg: PowerConfig, n: int, powers) -> float:
    """Reward of link n from the power levels of its neighborhood (ordered like it)."""
    nb = cfg.graph.neighborhood(n)
    powers = np.asarray(powers, dtype=float)
    if powers.shape[-1] != len(nb):
        raise PowerConfigError(f"expected {len(nb)} neighborhood power levels")
    if np.any(powers < 0) or np.any(powers > cfg.p_max):
        raise PowerConfigError("power levels must lie in [0, p_max]")
    return float(_rate_minus_cost(cfg, n, nb, powers))


def power_transition(cfg: PowerConfig, p: int, delta: int) -> int:
    if delta not in POWER_DELTAS:
        raise PowerConfigError(f"power action must be one of {POWER_DELTAS}")
    return int(min(max(p + delta, 0), cfg.p_max))


def power_kernel(cfg: PowerConfig) -> np.ndarray:
    S = cfg.p_max + 1
    P = np.zeros((S, len(POWER_DELTAS), S))
    for p in range(S):
        for a, delta in enumerate(POWER_DELTAS):
            P[p, a, power_transition(cfg, p, delta)] = 1.0
    return P


class PowerReward:
    def __init__(self, cfg: PowerConfig, n: int):
        self.cfg = cfg
        self.n = n
        self.nb = cfg.graph.neighborhood(n)
        lo, hi = cfg.reward_range(n)
        self.offset, self.scale = (lo, hi - lo) if cfg.normalize else (0.0, 1.0)

    def __call__(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        r = _rate_minus_cost(self.cfg, self.n, self.nb, np.asarray(states, dtype=float))
        return (r - self.offset) / self.scale


def build_power_mdp(cfg: PowerConfig, gamma: float = 0.9, init_dist=None) -> NetworkMdp:
    kernel = power_kernel(cfg)
    N = cfg.link_count
    bounds = []
    for n in range(N):
        lo, hi = cfg.reward_range(n)
        bounds.append(1.0 if cfg.normalize else max(abs(lo), abs(hi)))
    return NetworkMdp(
        cfg.graph,
        [LocalMdp(kernel) for _ in range(N)],
        [PowerReward(cfg, n) for n in range(N)],
        gamma,
        init_dist,
        tuple(bounds),
    )
