"""Training curves as SVG: mean across seeds with a shaded 95% band per algorithm."""

from __future__ import annotations

import glob as globmod
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from recmarl.experiment.runner import confidence_band  # noqa: E402
from recmarl.records import RunRecord  # noqa: E402

PLOT_METRICS = ("avg_reward", "discounted_return", "grad_norm")
TITLES = {
    "avg_reward": "average per-step network reward",
    "discounted_return": "discounted return",
    "grad_norm": "exact gradient norm",
}


class PlotUsageError(ValueError):
    pass


def _label(path: Path, rec: RunRecord) -> str:
    return rec.metadata.get("label") or rec.metadata.get("algorithm") or path.parent.name


def collect(pattern: str) -> dict[str, list[RunRecord]]:
    paths = sorted(p for p in map(Path, globmod.glob(pattern, recursive=True))
                   if p.suffix == ".csv" and p.name != "aggregate.csv")
    if not paths:
        raise PlotUsageError(f"no metric files match '{pattern}'")
    groups: dict[str, list[RunRecord]] = defaultdict(list)
    for p in paths:
        rec = RunRecord.load(p)
        groups[_label(p, rec)].append(rec)
    return dict(sorted(groups.items()))


def plot(pattern: str, out_path) -> Path:
    """Write one subplot per metric that has finite data; returns the output path."""
    groups = collect(pattern)
    metrics = [m for m in PLOT_METRICS
               if any(np.isfinite(r.column(m)).any() for recs in groups.values() for r in recs)]
    plt.rcParams["svg.hashsalt"] = "recmarl"
    fig, axes = plt.subplots(len(metrics), 1, figsize=(6.4, 2.8 * len(metrics)), squeeze=False)
    for ax, metric in zip(axes[:, 0], metrics):
        for label, recs in groups.items():
            x = recs[0].column("iteration")
            ys = np.array([r.column(metric) for r in recs if r.column(metric).size == x.size])
            if not np.isfinite(ys).any():
                continue
            bands = np.array([confidence_band(ys[:, i]) for i in range(x.size)])
            (line,) = ax.plot(x, bands[:, 0], label=label, linewidth=1.4)
            if len(ys) > 1:
                ax.fill_between(x, bands[:, 1], bands[:, 2], color=line.get_color(), alpha=0.25, linewidth=0)
        ax.set_ylabel(TITLES[metric])
        ax.set_xlabel("iteration")
        ax.legend(loc="best", fontsize="small")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
