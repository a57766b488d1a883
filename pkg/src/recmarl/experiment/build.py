"""Turn a validated config into environments, learners and one RunRecord per seed."""

from __future__ import annotations

import time

import numpy as np

from recmarl import __version__, baselines
from recmarl.environments import AccessConfig, PowerConfig, build_network_mdp, topology
from recmarl.experiment.config import ConfigError, ExperimentConfig
from recmarl.learners import LearnerConfig, exact_estimator, run_dpg_exact, run_dpg_inexact, td_rdac
from recmarl.network_mdp import NetworkMdp, PolicyParams
from recmarl.records import RolloutEvaluator, RunRecord


def _need(topo: dict, *keys):
    missing = [k for k in keys if topo.get(k) is None]
    if missing:
        raise ConfigError(f"topology kind '{topo['kind']}' needs {', '.join(missing)}")


def build_environment(cfg: ExperimentConfig):
    """(environment config, NetworkMdp) described by the config."""
    env, topo = cfg.environment, cfg.topology
    kind = topo["kind"]
    if env["kind"] == "access":
        n = len(env["arrival_prob"])
        edges = topo["edges"]
        if kind == "line":
            if topo["nodes"] is not None and topo["nodes"] != n:
                raise ConfigError(f"topology has {topo['nodes']} nodes but arrival_prob has {n} entries")
            avail = topology.line_availability(n)
        elif kind == "grid":
            _need(topo, "rows", "cols")
            avail = topology.grid_availability(topo["rows"], topo["cols"])
        else:
            _need(topo, "availability")
            avail = topo["availability"]
        ec = AccessConfig(avail, env["arrival_prob"], env["success_prob"], env["deadline"],
                          None if edges is None else tuple(map(tuple, edges)), env["normalize"])
    else:
        if kind == "line":
            _need(topo, "nodes")
            positions = topology.line_positions(topo["nodes"], topo["spacing"])
            edges = topology.line_edges(topo["nodes"])
        elif kind == "grid":
            _need(topo, "rows", "cols")
            positions = topology.grid_positions(topo["rows"], topo["cols"], topo["spacing"])
            edges = topology.grid_edges(topo["rows"], topo["cols"])
        else:
            _need(topo, "positions", "edges")
            positions, edges = topo["positions"], topo["edges"]
        ec = PowerConfig(tuple(map(tuple, positions)), tuple(map(tuple, edges)), env["p_max"], env["kappa"],
                         env["sigma"] if np.isscalar(env["sigma"]) else tuple(env["sigma"]),
                         env["price"] if np.isscalar(env["price"]) else tuple(env["price"]), env["normalize"])
    return ec, build_network_mdp(ec, env["gamma"])


def learner_config(block: dict, gamma: float, seed: int) -> LearnerConfig:
    keys = ("T", "H", "eta", "c_eta", "alpha", "alpha_schedule", "lam", "eval_interval", "warm_start", "grad_clip")
    return LearnerConfig(gamma=gamma, seed=seed, **{k: block[k] for k in keys})


def initial_params(mdp: NetworkMdp, block: dict, seed: int) -> PolicyParams:
    if block["init"] == "zeros":
        return PolicyParams.zeros(mdp)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    return PolicyParams.random(mdp, rng, block["init_scale"])


def aloha_config(env: AccessConfig, block: dict) -> baselines.AlohaConfig:
    p = block["transmit_prob"]
    if p is None:
        return baselines.AlohaConfig.default(env)
    if np.isscalar(p):
        return baselines.AlohaConfig.uniform(env, p)
    if len(p) != env.node_count:
        raise ConfigError(f"transmit_prob needs {env.node_count} entries")
    return baselines.AlohaConfig(tuple(p))


def _eval_points(lc: LearnerConfig) -> range:
    return range(1, lc.T // lc.eval_interval + 1)


def _pg_rows(record: RunRecord, trace, evaluator: RolloutEvaluator, lc: LearnerConfig, start: float) -> None:
    for k in _eval_points(lc):
        t = k * lc.eval_interval
        avg, disc = evaluator(trace.params[t], k)
        record.add(t, avg, disc, trace.grad_norms[t], trace.grad_norms[t], time.perf_counter() - start)


def run_single(cfg: ExperimentConfig, learner_index: int, seed: int) -> RunRecord:
    """One seed of one learner; deterministic in (config, learner, seed)."""
    block = cfg.learners[learner_index]
    env, mdp = build_environment(cfg)
    lc = learner_config(block, mdp.gamma, seed)
    evaluator = RolloutEvaluator(mdp, seed, cfg.trial["eval_steps"], cfg.trial["eval_episodes"])
    algo = block["algorithm"]
    start = time.perf_counter()
    if algo == "td_rdac":
        record = td_rdac(mdp, initial_params(mdp, block, seed), lc, evaluator)
    elif algo in ("dpg_exact", "dpg_inexact"):
        params0 = initial_params(mdp, block, seed)
        if algo == "dpg_exact":
            trace = run_dpg_exact(mdp, params0, lc)
        else:
            trace = run_dpg_inexact(mdp, exact_estimator(lc.lam or 0.0), params0, lc, oracle_diagnostics=False)
        record = RunRecord(metadata={"eta": trace.eta})
        _pg_rows(record, trace, evaluator, lc, start)
        record.params = trace.params[-1]
    elif algo == "aloha":
        ac = aloha_config(env, block)
        tables = baselines.aloha_policy_tables(env, ac)
        record = RunRecord(metadata={"transmit_prob": list(ac.transmit_prob)})
        for k in _eval_points(lc):
            avg, disc = evaluator.score_probs(tables, k)
            record.add(k * lc.eval_interval, avg, disc, elapsed=time.perf_counter() - start)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
        p0 = rng.integers(0, env.p_max + 1, size=env.link_count)
        history, fixed_at = baselines.run_dpc(env, p0, rounds=lc.T)
        record = RunRecord(metadata={"fixed_at": fixed_at, "final_powers": history[-1].tolist()})
        for k in _eval_points(lc):
            rng = evaluator.stream(k)
            scores = [baselines.evaluate_dpc(env, mdp, evaluator.steps, rng) for _ in range(evaluator.episodes)]
            avg, disc = np.mean(scores, axis=0)
            record.add(k * lc.eval_interval, avg, disc, elapsed=time.perf_counter() - start)
    record.metadata.update({
        "algorithm": algo,
        "label": cfg.learner_label(learner_index),
        "seed": int(seed),
        "version": __version__,
        "config": cfg.echo(learner_index, seed),
    })
    return record
