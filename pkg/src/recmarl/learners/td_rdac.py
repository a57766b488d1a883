"""Regularized distributed actor-critic with per-agent neighborhood TD critics.

Every outer iteration draws one shared network rollout. Each agent then
  1. reads its neighbors' state sequences through the exchange,
  2. runs TD(0) from a zeroed table over its neighborhood states,
  3. publishes its TD errors,
  4. averages the TD errors of its neighborhood into a score-function gradient,
  5. takes a regularized ascent step on its own logits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from recmarl import _kernels
from recmarl.learners.config import LearnerConfig, td_rdac_lambda, td_rdac_step, td_step_size
from recmarl.learners.exchange import NeighborExchange
from recmarl.network_mdp import NetworkMdp, PolicyParams, Trajectory, rollout, strides
from recmarl.oracle import (
    DEFAULT_CAP,
    bundle_norm,
    exact_regularized_gradient,
    joint_sizes,
)
from recmarl.records import RolloutEvaluator, RunRecord

SLACK = 1.1


class ValueBoundError(RuntimeError):
    """A critic entry left the range implied by bounded rewards."""


@dataclass
class ValueTable:
    agent: int
    neighborhood: tuple[int, ...]
    radices: tuple[int, ...]
    values: np.ndarray  # flattened with the first neighbor varying fastest

    def at(self, local_states) -> float:
        return float(self.values[int(np.dot(local_states, strides(self.radices)))])


@dataclass
class NeighborhoodSlice:
    """What agent n sees of a shared rollout: its neighborhood indices, reward and own moves."""

    agent: int
    idx: np.ndarray  # (H + 1,) flattened neighborhood states
    rewards: np.ndarray  # (H,) r_n
    states: np.ndarray  # (H + 1,) s_n
    actions: np.ndarray  # (H,) a_n


def publish_rollout(exchange: NeighborExchange, traj: Trajectory) -> None:
    """Each agent posts its own state sequence for the round."""
    for n in range(traj.states.shape[1]):
        exchange.post(n, "states", traj.states[:, n])


def observe(n: int, neighborhood, radices, exchange: NeighborExchange, traj: Trajectory) -> NeighborhoodSlice:
    st = strides(radices)
    idx = np.zeros(traj.states.shape[0], dtype=np.int64)
    for k, stride in zip(neighborhood, st):
        idx += exchange.read(n, k, "states") * stride
    return NeighborhoodSlice(n, idx, traj.rewards[:, n].copy(), traj.states[:, n].copy(), traj.actions[:, n].copy())


def td_inner_loop(n: int, mdp: NetworkMdp, params: PolicyParams, H: int, alpha: float,
                  rng: np.random.Generator | None = None, exchange: NeighborExchange | None = None,
                  trajectory: Trajectory | None = None, values: np.ndarray | None = None):
    """TD(0) critic for agent n over one rollout; returns (ValueTable, NeighborhoodSlice).

    Without a ``trajectory`` a fresh rollout of H transitions is drawn from
    ``rng`` and published. ``values`` warm-starts the table (zeros otherwise).
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if trajectory is None:
        trajectory = rollout(mdp, params, H, rng)
        exchange = exchange or NeighborExchange(mdp.graph)
        publish_rollout(exchange, trajectory)
    elif exchange is None:
        exchange = NeighborExchange(mdp.graph)
        publish_rollout(exchange, trajectory)
    nb = mdp.neighborhood(n)
    radices = tuple(mdp.state_counts[k] for k in nb)
    sl = observe(n, nb, radices, exchange, trajectory)
    table = np.zeros(int(np.prod(radices))) if values is None else np.array(values, dtype=float)
    alphas = np.full(sl.rewards.size, float(alpha))
    _kernels.td_sweep(table, sl.idx, sl.rewards, alphas, mdp.gamma)
    return ValueTable(n, nb, radices, table), sl


def compute_td_errors(table: ValueTable, sl: NeighborhoodSlice, gamma: float) -> np.ndarray:
    """delta(h) = r(h) + gamma V(s(h+1)) - V(s(h)) with the final table."""
    V = table.values
    return sl.rewards + gamma * V[sl.idx[1:]] - V[sl.idx[:-1]]


def score_accumulate(probs: np.ndarray, states: np.ndarray, actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_h w_h * grad log pi(a_h | s_h) for softmax logits."""
    S, A = probs.shape
    hits = np.bincount(states * A + actions, weights=weights, minlength=S * A).reshape(S, A)
    mass = np.bincount(states, weights=weights, minlength=S)
    return hits - mass[:, None] * probs


def estimate_agent_gradient(n: int, exchange: NeighborExchange, sl: NeighborhoodSlice, params: PolicyParams,
                            gamma: float, n_agents: int, neighborhood=None) -> np.ndarray:
    """Score-function estimate for theta_n from the neighborhood-averaged TD errors."""
    nb = neighborhood if neighborhood is not None else exchange.graph.neighborhood(n)
    H = sl.actions.size
    delta = np.zeros(H)
    for k in nb:
        delta += exchange.read(n, k, "delta")
    w = gamma ** np.arange(1, H + 1) * delta / n_agents / (1 - gamma)
    return score_accumulate(params.probs(n), sl.states[:-1], sl.actions, w)


def regularizer_step(probs: np.ndarray, lam: float) -> np.ndarray:
    """(lambda / |S_n|) (1/|A_n| - pi)."""
    S, A = probs.shape
    return lam / S * (1.0 / A - probs)


def _clip(g: np.ndarray, limit: float | None) -> np.ndarray:
    if limit is None:
        return g
    norm = float(np.sqrt((g**2).sum()))
    return g * (limit / norm) if norm > limit else g


def _oracle_feasible(mdp: NetworkMdp) -> bool:
    nS, nA = joint_sizes(mdp)
    return nS * max(nS, nA) <= DEFAULT_CAP


def td_rdac(mdp: NetworkMdp, params0: PolicyParams, cfg: LearnerConfig, evaluator: RolloutEvaluator | None = None,
            neighborhoods=None, grad_diagnostic: bool = True) -> RunRecord:
    """Train with TD-RDAC for cfg.T outer iterations; one metric row every eval_interval.

    ``neighborhoods`` overrides what each agent believes its neighborhood is;
    reads are still checked against the true graph, so a widened belief
    raises LocalityViolation.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    evaluator = evaluator or RolloutEvaluator(mdp, cfg.seed)
    eta = td_rdac_step(cfg)
    lam = td_rdac_lambda(mdp, cfg)
    alpha = td_step_size(cfg)
    N = mdp.n_agents
    nbs = [tuple(neighborhoods[n]) if neighborhoods is not None else mdp.neighborhood(n) for n in range(N)]
    radices = [tuple(mdp.state_counts[k] for k in nb) for nb in nbs]
    bounds = [SLACK * max(mdp.reward_bound(k) for k in mdp.neighborhood(n)) / (1 - mdp.gamma) for n in range(N)]
    feasible = grad_diagnostic and _oracle_feasible(mdp)

    params = params0.copy()
    exchange = NeighborExchange(mdp.graph)
    tables = [np.zeros(int(np.prod(r))) for r in radices]
    record = RunRecord(metadata={
        "algorithm": "td_rdac",
        "learner_config": cfg.as_dict(),
        "eta": eta,
        "lambda": lam,
        "alpha": alpha,
        "initial": dict(zip(("avg_reward", "discounted_return"), evaluator(params, 0))),
    })
    start = time.perf_counter()
    max_abs_v = 0.0
    for t in range(cfg.T):
        traj = rollout(mdp, params, cfg.H, rng)
        exchange.clear()
        publish_rollout(exchange, traj)
        slices = []
        for n in range(N):
            sl = observe(n, nbs[n], radices[n], exchange, traj)
            if not cfg.warm_start:
                tables[n][:] = 0.0
            _kernels.td_sweep(tables[n], sl.idx, sl.rewards, np.full(cfg.H, alpha), mdp.gamma)
            peak = float(np.abs(tables[n]).max())
            if peak > bounds[n]:
                raise ValueBoundError(f"agent {n}: |V| = {peak:.4g} exceeds {bounds[n]:.4g} at iteration {t}")
            max_abs_v = max(max_abs_v, peak)
            table = ValueTable(n, nbs[n], radices[n], tables[n])
            exchange.post(n, "delta", compute_td_errors(table, sl, mdp.gamma))
            slices.append(sl)
        grads = [
            _clip(estimate_agent_gradient(n, exchange, slices[n], params, mdp.gamma, N, nbs[n]), cfg.grad_clip)
            for n in range(N)
        ]
        probs = params.all_probs()
        for n in range(N):
            params.tables[n] += eta * grads[n] + regularizer_step(probs[n], lam)
        if (t + 1) % cfg.eval_interval == 0:
            k = (t + 1) // cfg.eval_interval
            avg, disc = evaluator(params, k)
            gnorm = bundle_norm(exact_regularized_gradient(mdp, params, lam)) if feasible else float("nan")
            record.add(t + 1, avg, disc, gnorm, bundle_norm(grads), time.perf_counter() - start)
    record.metadata["max_abs_value"] = max_abs_v
    record.params = params
    return record


__all__ = [
    "NeighborhoodSlice",
    "ValueBoundError",
    "ValueTable",
    "compute_td_errors",
    "estimate_agent_gradient",
    "observe",
    "publish_rollout",
    "regularizer_step",
    "score_accumulate",
    "td_inner_loop",
    "td_rdac",
]
