"""Policy-gradient ascent with exact or estimated distributed gradients (small instances)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from recmarl.learners.config import LearnerConfig, exact_pg_step
from recmarl.network_mdp import NetworkMdp, PolicyParams
from recmarl.oracle import (
    GradientBundle,
    OptimalSolution,
    bundle_norm,
    exact_gradient,
    exact_regularized_gradient,
    optimal_action_prob,
    regularized_objective,
    smoothness_constant,
    value_at,
)

Estimator = Callable[[NetworkMdp, PolicyParams, int], GradientBundle]


class EstimatorError(RuntimeError):
    """Wraps a failure of the gradient estimator with the iteration it happened at."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"gradient estimator failed at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


@dataclass
class PgTrace:
    """Iterates of a policy-gradient run; entry t describes theta^t (t = 0..T)."""

    eta: float
    params: list[PolicyParams] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    diagnostics: dict[str, list[float]] = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        if name in ("values", "grad_norms"):
            return np.asarray(getattr(self, name))
        return np.asarray(self.diagnostics[name])

    def __iter__(self):
        return iter(zip(self.params, self.values))


def _step(params: PolicyParams, grads: GradientBundle, eta: float) -> PolicyParams:
    return PolicyParams([t + eta * g for t, g in zip(params.tables, grads)])


def run_dpg_exact(mdp: NetworkMdp, params0: PolicyParams, cfg: LearnerConfig,
                  optimum: OptimalSolution | None = None, keep_params: bool = True) -> PgTrace:
    """Exact distributed gradient ascent on V(rho) for cfg.T steps.

    The step defaults to (1 - gamma)^3 / (48 N^2). With ``optimum`` the
    diagnostic c_t = min_s pi_t(a*(s)|s) is tracked as well.
    """
    eta = cfg.eta if cfg.eta is not None else exact_pg_step(mdp)
    trace = PgTrace(eta)
    if optimum is not None:
        trace.diagnostics["opt_action_prob"] = []
    params = params0.copy()
    for t in range(cfg.T + 1):
        grads = exact_gradient(mdp, params)
        trace.values.append(value_at(mdp, params))
        trace.grad_norms.append(bundle_norm(grads))
        if keep_params or t in (0, cfg.T):
            trace.params.append(params)
        if optimum is not None:
            trace.diagnostics["opt_action_prob"].append(optimal_action_prob(mdp, params, optimum))
        if t < cfg.T:
            params = _step(params, grads, eta)
    return trace


def exact_estimator(lam: float) -> Estimator:
    """Plug-in estimator that returns the exact regularized gradient."""
    return lambda mdp, params, t: exact_regularized_gradient(mdp, params, lam)


def run_dpg_inexact(mdp: NetworkMdp, grad_estimator: Estimator, params0: PolicyParams, cfg: LearnerConfig,
                    oracle_diagnostics: bool = True, keep_params: bool = True) -> PgTrace:
    """Ascent on the regularized objective with an arbitrary gradient estimator.

    The step defaults to 1 / beta' where beta' is the smoothness constant of
    the regularized objective. Diagnostics (when the oracle is feasible):
    ``true_grad_norm`` = |grad L|, ``objective`` = L, ``estimate_error``.
    """
    lam = 0.0 if cfg.lam is None else cfg.lam
    eta = cfg.eta if cfg.eta is not None else 1.0 / smoothness_constant(mdp, lam)
    trace = PgTrace(eta)
    keys = ("true_grad_norm", "objective", "estimate_error") if oracle_diagnostics else ()
    for k in keys:
        trace.diagnostics[k] = []
    params = params0.copy()
    for t in range(cfg.T + 1):
        try:
            est = grad_estimator(mdp, params, t)
        except Exception as exc:  # surfaced with the iteration index
            raise EstimatorError(t, exc) from exc
        if len(est) != mdp.n_agents or any(np.shape(g) != p.shape for g, p in zip(est, params.tables)):
            raise EstimatorError(t, ValueError("estimate does not match the logit table shapes"))
        trace.grad_norms.append(bundle_norm(est))
        if keep_params or t in (0, cfg.T):
            trace.params.append(params)
        if oracle_diagnostics:
            true = exact_regularized_gradient(mdp, params, lam)
            trace.values.append(value_at(mdp, params))
            trace.diagnostics["true_grad_norm"].append(bundle_norm(true))
            trace.diagnostics["objective"].append(regularized_objective(mdp, params, lam))
            trace.diagnostics["estimate_error"].append(bundle_norm([e - g for e, g in zip(est, true)]))
        if t < cfg.T:
            params = _step(params, est, eta)
    return trace
