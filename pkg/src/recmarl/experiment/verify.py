"""Certification suites backed by the exact oracle; each returns a JSON-able report."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from recmarl import oracle
from recmarl.environments import LINE_ARRIVALS, LINE_Q_RELIABLE, access_line, build_network_mdp
from recmarl.instances import certification_instances, cooperative_pair
from recmarl.learners import LearnerConfig, run_dpg_exact, td_inner_loop
from recmarl.network_mdp import PolicyParams, rollout

SUITES = ("decomposition", "gradient", "monotone", "td_accuracy")


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""


@dataclass
class Report:
    suite: str
    checks: list[Check] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "runtime_s": self.runtime_s,
                "checks": [asdict(c) for c in self.checks]}


def _le(name, measured, threshold, detail="") -> Check:
    return Check(name, bool(measured <= threshold), float(measured), float(threshold), detail)


def decomposition(count: int = 300, seed: int = 0) -> Report:
    """max |V(s) - mean_n V_n(s_N(n))| over randomized instances."""
    worst, where = 0.0, ""
    for inst in certification_instances(count, seed):
        err = oracle.verify_value_decomposition(inst.mdp, inst.params)
        if err > worst:
            worst, where = err, inst.label
    return Report("decomposition", [_le("value_decomposition_max_abs", worst, 1e-8, f"{count} instances; worst {where}")])


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-8))


def gradient(count: int = 300, seed: int = 0, h: float = 1e-5) -> Report:
    """Neighborhood-advantage gradient vs central differences and vs the global-Q form."""
    fd_worst, glob_worst = 0.0, 0.0
    for inst in certification_instances(count, seed):
        exact = np.concatenate([g.ravel() for g in oracle.exact_gradient(inst.mdp, inst.params)])
        fd = np.concatenate([g.ravel() for g in oracle.fd_gradient(inst.mdp, inst.params, h)])
        glob = np.concatenate([g.ravel() for g in oracle.naive_global_gradient(inst.mdp, inst.params)])
        fd_worst = max(fd_worst, _relative(exact, fd))
        glob_worst = max(glob_worst, float(np.abs(exact - glob).max()))
    return Report("gradient", [
        _le("finite_difference_max_relative", fd_worst, 1e-4, f"{count} instances, h={h}"),
        _le("global_q_form_max_abs", glob_worst, 1e-9, f"{count} instances"),
    ])


def monotone(T: int = 5000, eta: float | None = None, gap_fraction: float = 0.05) -> Report:
    """Exact distributed gradient ascent on a 2-agent, 2-state, 2-action pair at gamma = 0.9.

    With ``eta=None`` the step is (1 - gamma)^3 / (48 N^2).
    """
    mdp = cooperative_pair(0.9)
    opt = oracle.joint_policy_iteration(mdp)
    trace = run_dpg_exact(mdp, PolicyParams.zeros(mdp), LearnerConfig(T=T, eta=eta, gamma=0.9),
                          optimum=opt, keep_params=False)
    v = np.asarray(trace.values)
    gap = opt.value - v
    worst_drop = float(max(0.0, -np.diff(v).min()))
    half = len(v) // 2
    scaled = np.arange(half, len(v)) * gap[half:]
    rise = float(max(0.0, np.diff(scaled).max()))
    c = np.asarray(trace.diagnostics["opt_action_prob"])
    return Report("monotone", [
        _le("largest_value_decrease", worst_drop, 0.0, f"eta={trace.eta:.3g}, T={T}"),
        _le("final_gap_fraction", float(gap[-1] / gap[0]), gap_fraction,
            f"V*={opt.value:.6f} V0={v[0]:.6f} VT={v[-1]:.6f}"),
        _le("t_times_gap_largest_rise_last_half", rise, 0.0, "O(1/t) shape"),
        Check("min_optimal_action_prob_positive", bool(c.min() > 0), float(c.min()), 0.0, "c_t over the run"),
    ])


def td_error_table(horizons=(10**3, 10**4, 10**5), alpha: float = 0.1, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Relative max-norm TD error per (horizon, agent) under the uniform policy on a 3-node access line."""
    env = access_line(arrival_prob=LINE_ARRIVALS[:3], success_prob=LINE_Q_RELIABLE[:2])
    mdp = build_network_mdp(env, 0.9)
    params = PolicyParams.zeros(mdp)
    exact = oracle.solve_local_values(mdp, params)
    scale = np.array([np.abs(lv.V).max() for lv in exact])
    errs = np.zeros((len(horizons), mdp.n_agents))
    for i, H in enumerate(horizons):
        traj = rollout(mdp, params, H, np.random.default_rng(np.random.SeedSequence([seed, int(H)])))
        for n in range(mdp.n_agents):
            table, _ = td_inner_loop(n, mdp, params, H, alpha, trajectory=traj)
            errs[i, n] = np.abs(table.values - exact[n].V).max()
    return errs, scale


def td_accuracy(alpha: float = 0.1, seed: int = 0) -> Report:
    horizons = (10**3, 10**4, 10**5)
    errs, scale = td_error_table(horizons, alpha, seed)
    rel = errs / scale
    steps = np.diff(errs, axis=0)
    return Report("td_accuracy", [
        Check("error_strictly_decreasing_in_H", bool(steps.max() < 0), float(steps.max()), 0.0,
              f"relative errors by H={list(horizons)}: {np.round(rel, 4).tolist()}"),
        _le("final_relative_error", float(rel[-1].max()), 0.05, f"alpha={alpha}, H={horizons[-1]}"),
    ])


def run_suite(name: str) -> list[Report]:
    names = SUITES if name == "all" else (name,)
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite '{name}'; choose from {', '.join(SUITES + ('all',))}")
    reports = []
    for n in names:
        start = time.perf_counter()
        rep = globals()[n]()
        rep.runtime_s = time.perf_counter() - start
        reports.append(rep)
    return reports
