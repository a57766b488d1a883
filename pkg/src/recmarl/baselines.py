"""Model-based comparison policies: slotted ALOHA and discrete DPC best response.

Both read true environment parameters (success probabilities, channel gains,
noise), which the learners never see.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from recmarl.environments.access import AccessConfig
from recmarl.environments.power import PowerConfig
from recmarl.network_mdp import NetworkMdp, local_rewards, sample_initial_state, step


@dataclass(frozen=True)
class AlohaConfig:
    transmit_prob: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.transmit_prob)
        if any(not 0.0 < p <= 1.0 for p in probs):
            raise ValueError("ALOHA transmit probabilities must lie in (0, 1]")
        object.__setattr__(self, "transmit_prob", probs)

    @classmethod
    def default(cls, env: AccessConfig) -> "AlohaConfig":
        """Attempt with probability 1 / (contenders at the node's busiest AP)."""
        c = env.contenders
        return cls(tuple(1.0 / max(c[m] for m in aps) for aps in env.availability))

    @classmethod
    def uniform(cls, env: AccessConfig, p: float) -> "AlohaConfig":
        return cls((p,) * env.node_count)


def ap_weights(env: AccessConfig, n: int) -> np.ndarray:
    """Selection probabilities over AP(n), proportional to q_m / contenders(m)."""
    w = np.array([env.success_prob[m] / env.contenders[m] for m in env.availability[n]])
    if w.sum() <= 0:
        return np.full(len(w), 1.0 / len(w))
    return w / w.sum()


def aloha_action(env: AccessConfig, cfg: AlohaConfig, n: int, queue_state: int, rng: np.random.Generator) -> int:
    """Action index for node n: 0 is silence, i >= 1 targets the i-th AP in AP(n)."""
    u_attempt, u_ap = rng.random(2)
    if queue_state == 0 or u_attempt >= cfg.transmit_prob[n]:
        return 0
    cdf = np.cumsum(ap_weights(env, n))
    return 1 + min(int(np.searchsorted(cdf, u_ap, side="right")), len(cdf) - 1)


def aloha_actions(env: AccessConfig, cfg: AlohaConfig, states, rng: np.random.Generator) -> np.ndarray:
    return np.array([aloha_action(env, cfg, n, int(s), rng) for n, s in enumerate(states)], dtype=np.int64)


def aloha_policy_tables(env: AccessConfig, cfg: AlohaConfig) -> list[np.ndarray]:
    """ALOHA as local (queue state, action) distributions, same law as :func:`aloha_action`."""
    tables = []
    for n in range(env.node_count):
        w = ap_weights(env, n)
        t = np.zeros((env.state_count, 1 + len(w)))
        t[:, 0] = 1.0 - cfg.transmit_prob[n]
        t[:, 1:] = cfg.transmit_prob[n] * w
        t[0] = 0.0
        t[0, 0] = 1.0
        tables.append(t)
    return tables


def evaluate_aloha(env: AccessConfig, cfg: AlohaConfig, mdp: NetworkMdp, steps: int, rng: np.random.Generator):
    """Average per-step network reward and discounted return of one ALOHA rollout."""
    s = sample_initial_state(mdp, rng)
    rewards = np.empty(steps)
    for t in range(steps):
        a = aloha_actions(env, cfg, s, rng)
        rewards[t] = local_rewards(mdp, s, a).mean()
        s = step(mdp, s, a, rng)
    return _summaries(rewards, mdp.gamma)


@dataclass
class DpcState:
    powers: np.ndarray
    interference: np.ndarray


@lru_cache(maxsize=32)
def _coupling(env: PowerConfig) -> np.ndarray:
    """C[m, n] = G[m, n] for graph neighbors m != n, else 0."""
    C = np.zeros((env.link_count, env.link_count))
    for n in range(env.link_count):
        for m in env.graph.neighborhood(n):
            if m != n:
                C[m, n] = env.gains[m, n]
    C.flags.writeable = False
    return C


def interference(env: PowerConfig, powers) -> np.ndarray:
    """Interference seen by each link from its graph neighbors."""
    return np.asarray(powers, dtype=float) @ _coupling(env)


def _utilities(env: PowerConfig, observed: np.ndarray) -> np.ndarray:
    """(N, p_max + 1) utility of every discrete power against observed interference."""
    p = np.arange(env.p_max + 1)
    G = np.diag(env.gains)[:, None]
    sigma = np.asarray(env.sigma)[:, None]
    price = np.asarray(env.price)[:, None]
    return np.log1p(p * G / (observed[:, None] + sigma)) - price * p


def dpc_step(env: PowerConfig, n: int, observed_interference: float) -> int:
    """Best discrete power against the observed interference; ties go to the lower level."""
    if observed_interference < 0:
        raise ValueError("interference must be non-negative")
    obs = np.zeros(env.link_count)
    obs[n] = observed_interference
    util = _utilities(env, obs)[n]
    return int(np.flatnonzero(util >= util.max())[0])


def dpc_init(env: PowerConfig, powers) -> DpcState:
    powers = np.asarray(powers, dtype=np.int64)
    return DpcState(powers, interference(env, powers))


def dpc_round(env: PowerConfig, state: DpcState) -> DpcState:
    """Synchronous best response of every link to last round's interference."""
    util = _utilities(env, state.interference)
    # first index attaining the row maximum, i.e. ties go to the lower power
    new = np.argmax(util >= util.max(axis=1, keepdims=True), axis=1).astype(np.int64)
    return DpcState(new, interference(env, new))


def run_dpc(env: PowerConfig, powers0, rounds: int = 50):
    """Iterate best responses; returns (power history, first round of a repeated profile or None)."""
    state = dpc_init(env, powers0)
    history = [state.powers.copy()]
    fixed_at = None
    for r in range(1, rounds + 1):
        state = dpc_round(env, state)
        history.append(state.powers.copy())
        if fixed_at is None and np.array_equal(history[-1], history[-2]):
            fixed_at = r - 1
    return np.array(history), fixed_at


def evaluate_dpc(env: PowerConfig, mdp: NetworkMdp, steps: int, rng: np.random.Generator):
    """DPC dynamics from a random initial power profile, scored like any policy."""
    state = dpc_init(env, sample_initial_state(mdp, rng))
    powers = np.empty((steps, env.link_count), dtype=np.int64)
    for t in range(steps):
        powers[t] = state.powers
        state = dpc_round(env, state)
    rewards = local_rewards(mdp, powers, np.zeros_like(powers)).mean(axis=1)
    return _summaries(rewards, mdp.gamma)


def _summaries(rewards: np.ndarray, gamma: float) -> tuple[float, float]:
    disc = float(np.sum(rewards * gamma ** np.arange(len(rewards))))
    return float(rewards.mean()), disc
