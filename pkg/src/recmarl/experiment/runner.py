"""Seeded trials, per-seed metric files and cross-seed aggregates."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy import stats

from recmarl.experiment.build import run_single
from recmarl.experiment.config import ExperimentConfig, load
from recmarl.records import COLUMNS, RunRecord

METRICS = COLUMNS[1:]
FINAL_FRACTION = 0.1


class RunFailure(RuntimeError):
    """A seed failed; completed seeds were already written."""


def output_root(cli_dir=None, cfg: ExperimentConfig | None = None) -> Path:
    """--out-dir, then the config's trial.output_dir, then $RECMARL_OUT, then ./runs."""
    if cli_dir:
        return Path(cli_dir)
    if cfg is not None and cfg.trial.get("output_dir"):
        return Path(cfg.trial["output_dir"])
    return Path(os.environ.get("RECMARL_OUT", "runs"))


def confidence_band(values: np.ndarray, level: float = 0.95) -> tuple[float, float, float]:
    """(mean, low, high) with a Student-t interval across seeds; degenerate for one seed."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2 or not np.all(np.isfinite(values)):
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + level / 2, values.size - 1) * values.std(ddof=1) / np.sqrt(values.size))
    return mean, mean - half, mean + half


def aggregate(records: list[RunRecord]) -> str:
    """CSV of mean and 95% band per metric, aligned on iteration."""
    iters = [r["iteration"] for r in records[0].rows]
    for rec in records[1:]:
        if [r["iteration"] for r in rec.rows] != iters:
            raise ValueError("records disagree on evaluation iterations")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "n_seeds"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "lo", "hi")])
    for i, it in enumerate(iters):
        row = [it, len(records)]
        for m in METRICS:
            row += [repr(x) for x in confidence_band([rec.rows[i][m] for rec in records])]
        w.writerow(row)
    return buf.getvalue()


def read_aggregate(path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def final_summary(records: list[RunRecord]) -> dict:
    finals = [rec.final_metric("avg_reward", FINAL_FRACTION) for rec in records]
    mean, lo, hi = confidence_band(finals)
    return {"final_avg_reward": finals, "mean": mean, "ci95": [lo, hi],
            "seeds": [rec.metadata.get("seed") for rec in records]}


def _task(args):
    cfg, index, seed = args
    return run_single(cfg, index, seed)


def run_experiment(cfg: ExperimentConfig | str | Path, seed_override=None, threads: int = 1,
                   out_dir=None, log=None) -> dict:
    """Run every learner for every seed; returns {label: [RunRecord, ...]} and writes files.

    Layout: <root>/<name>/<label>/seed_<k>.csv (+ .json), <label>/aggregate.csv,
    and <name>/summary.json.
    """
    if not isinstance(cfg, ExperimentConfig):
        cfg = load(cfg)
    seeds = list(seed_override) if seed_override else list(cfg.trial["seeds"])
    root = output_root(out_dir, cfg) / cfg.name
    tasks = [(cfg, i, s) for i in range(len(cfg.learners)) for s in seeds]
    results: dict[str, list[RunRecord]] = {cfg.learner_label(i): [] for i in range(len(cfg.learners))}
    failure = None

    def collect(task, outcome):
        label = cfg.learner_label(task[1])
        if isinstance(outcome, Exception):
            return outcome
        outcome.save(root / label / f"seed_{task[2]}.csv")
        results[label].append(outcome)
        if log:
            log(f"{cfg.name}/{label} seed {task[2]}: final avg reward {outcome.final_metric():.4f}")
        return None

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(t, pool.submit(_task, t)) for t in tasks]
            for t, fut in futures:
                try:
                    out = fut.result()
                except Exception as exc:  # flushed below after the other seeds finish
                    out = exc
                failure = collect(t, out) or failure
    else:
        for t in tasks:
            try:
                out = _task(t)
            except Exception as exc:
                out = exc
            failure = collect(t, out) or failure
            if failure is not None:
                break

    summary = {}
    for label, recs in results.items():
        if recs:
            (root / label / "aggregate.csv").write_text(aggregate(recs))
            summary[label] = final_summary(recs)
    root.mkdir(parents=True, exist_ok=True)
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if failure is not None:
        raise RunFailure(f"run failed: {failure}") from failure
    return results
