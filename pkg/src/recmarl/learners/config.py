from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from recmarl.network_mdp import NetworkMdp


class LearnerConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    T: int = 1000
    H: int = 100
    eta: float | None = None  # None -> algorithm-specific default
    c_eta: float = 1.0  # TD-RDAC default step is c_eta / sqrt(T)
    alpha: float = 0.1
    alpha_schedule: str = "constant"  # or "log_h": alpha = min(1, log(H) / H)
    lam: float | None = None  # None -> algorithm-specific default
    gamma: float = 0.9
    seed: int = 0
    eval_interval: int = 10
    warm_start: bool = False
    grad_clip: float | None = None  # per-agent max-norm clip of the TD-RDAC estimate

    def __post_init__(self):
        if self.T < 1 or self.H < 1:
            raise LearnerConfigError("T and H must be at least 1")
        if self.eta is not None and self.eta < 0:
            raise LearnerConfigError("eta must be non-negative")
        if not 0 < self.alpha <= 1:
            raise LearnerConfigError("alpha must lie in (0, 1]")
        if self.alpha_schedule not in ("constant", "log_h"):
            raise LearnerConfigError("alpha_schedule must be 'constant' or 'log_h'")
        if self.lam is not None and self.lam < 0:
            raise LearnerConfigError("lambda must be non-negative")
        if not 0 <= self.gamma < 1:
            raise LearnerConfigError("gamma must lie in [0, 1)")
        if self.eval_interval < 1:
            raise LearnerConfigError("eval_interval must be at least 1")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise LearnerConfigError("grad_clip must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


def exact_pg_step(mdp: NetworkMdp) -> float:
    """(1 - gamma)^3 / (48 N^2)."""
    return (1 - mdp.gamma) ** 3 / (48 * mdp.n_agents**2)


def td_rdac_step(cfg: LearnerConfig) -> float:
    return cfg.eta if cfg.eta is not None else cfg.c_eta / math.sqrt(cfg.T)


def td_rdac_lambda(mdp: NetworkMdp, cfg: LearnerConfig) -> float:
    """2 S_max A_max (log T)^(1/6) / ((1 - gamma)^2 T^(1/6)) unless set explicitly."""
    if cfg.lam is not None:
        return cfg.lam
    T = max(cfg.T, 2)
    s_max, a_max = max(mdp.state_counts), max(mdp.action_counts)
    return 2 * s_max * a_max * math.log(T) ** (1 / 6) / ((1 - mdp.gamma) ** 2 * T ** (1 / 6))


def td_step_size(cfg: LearnerConfig) -> float:
    if cfg.alpha_schedule == "log_h":
        return min(1.0, math.log(max(cfg.H, 2)) / cfg.H)
    return cfg.alpha
