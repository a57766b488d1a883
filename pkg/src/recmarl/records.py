"""Run records: metric rows plus metadata, and the rollout evaluator that fills them."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from recmarl import __version__
from recmarl.network_mdp import NetworkMdp, PolicyParams, Trajectory, rollout, rollout_probs

COLUMNS = ("iteration", "avg_reward", "discounted_return", "grad_norm", "est_grad_norm")

EVAL_STEPS = 500


@dataclass
class RunRecord:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    wall_clock: list[float] = field(default_factory=list)  # seconds since start, per row
    params: PolicyParams | None = None  # final policy; not serialized

    def add(self, iteration: int, avg_reward: float, discounted_return: float,
            grad_norm: float = math.nan, est_grad_norm: float = math.nan, elapsed: float = 0.0) -> None:
        self.rows.append({
            "iteration": int(iteration),
            "avg_reward": float(avg_reward),
            "discounted_return": float(discounted_return),
            "grad_norm": float(grad_norm),
            "est_grad_norm": float(est_grad_norm),
        })
        self.wall_clock.append(float(elapsed))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def final_metric(self, name: str = "avg_reward", fraction: float = 0.1) -> float:
        """Mean over the last ``fraction`` of evaluation points (at least one)."""
        vals = self.column(name)
        if vals.size == 0:
            raise ValueError("record has no rows")
        k = max(1, int(math.ceil(fraction * vals.size)))
        return float(vals[-k:].mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r["iteration"]] + [repr(float(r[c])) for c in COLUMNS[1:]])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"metadata": self.metadata, "wall_clock": self.wall_clock, "version": __version__}

    def save(self, csv_path: Path) -> tuple[Path, Path]:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(self.to_csv())
        meta_path = csv_path.with_suffix(".json")
        meta_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path

    @classmethod
    def load(cls, csv_path: Path) -> "RunRecord":
        csv_path = Path(csv_path)
        rec = cls()
        with csv_path.open() as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rec.rows.append({c: (int(row[c]) if c == "iteration" else float(row[c])) for c in COLUMNS})
        meta_path = csv_path.with_suffix(".json")
        if meta_path.exists():
            side = json.loads(meta_path.read_text())
            rec.metadata = side.get("metadata", {})
            rec.wall_clock = side.get("wall_clock", [])
        return rec


def summarize(rewards: np.ndarray, gamma: float) -> tuple[float, float]:
    """(mean per-step network reward, discounted return) of a reward sequence."""
    rewards = np.asarray(rewards, dtype=float)
    return float(rewards.mean()), float(np.sum(rewards * gamma ** np.arange(rewards.size)))


class RolloutEvaluator:
    """Scores a stochastic policy on fresh rollouts from a dedicated seed stream.

    The stream for evaluation point ``k`` is ``SeedSequence([seed, 1, k])`` so
    evaluation never perturbs the training generator.
    """

    def __init__(self, mdp: NetworkMdp, seed: int, steps: int = EVAL_STEPS, episodes: int = 1):
        if steps < 1 or episodes < 1:
            raise ValueError("evaluation needs at least one step and one episode")
        self.mdp = mdp
        self.seed = int(seed)
        self.steps = steps
        self.episodes = episodes

    def stream(self, k: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, 1, int(k)]))

    def _score(self, sample) -> tuple[float, float]:
        avg, disc = [], []
        for _ in range(self.episodes):
            traj: Trajectory = sample()
            a, d = summarize(traj.rewards.mean(axis=1), self.mdp.gamma)
            avg.append(a)
            disc.append(d)
        return float(np.mean(avg)), float(np.mean(disc))

    def __call__(self, params: PolicyParams, k: int) -> tuple[float, float]:
        rng = self.stream(k)
        return self._score(lambda: rollout(self.mdp, params, self.steps, rng))

    def score_probs(self, prob_tables, k: int) -> tuple[float, float]:
        rng = self.stream(k)
        return self._score(lambda: rollout_probs(self.mdp, prob_tables, self.steps, rng))
