"""Figure rendering for experiment reports.

Renders the plot-shaped outputs next to the CSVs: final buffer composition
per strategy, per-scene accuracy across training stages, and coverage
against buffer size. All figures are written as PNG files via the Agg
backend; nothing is shown interactively.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

if TYPE_CHECKING:
    from .harness import RunRecord

_COLORS = {"reservoir": "#d95f02", "class_balance": "#7570b3", "buff_cs": "#1b9e77",
           "without_buffering": "#666666"}


def _strategies(record: "RunRecord") -> list[str]:
    return sorted({k[0] for k, c in record.cells.items() if c.error is None})


def _sizes(record: "RunRecord") -> list[int]:
    return sorted({k[1] for k, c in record.cells.items() if c.error is None})


def _seeds(record: "RunRecord", strategy: str, size: int) -> list[int]:
    return sorted(k[2] for k, c in record.cells.items() if c.error is None and k[:2] == (strategy, size))


def render_distribution(record: "RunRecord", out: Path) -> list[Path]:
    """Grouped bars of mean final per-scene buffer counts, one file per size."""
    paths = []
    scenes = record.order
    for size in _sizes(record):
        strategies = [s for s in _strategies(record) if _seeds(record, s, size)]
        if not strategies:
            continue
        fig, ax = plt.subplots(figsize=(7, 3.2))
        width = 0.8 / max(len(strategies), 1)
        for si, strat in enumerate(strategies):
            means = []
            for scene in scenes:
                vals = []
                for seed in _seeds(record, strat, size):
                    dist = record.cells[(strat, size, seed)].distributions
                    if dist:
                        vals.append(dist[-1].get(scene, 0))
                means.append(sum(vals) / len(vals) if vals else 0.0)
            xs = [i + si * width for i in range(len(scenes))]
            ax.bar(xs, means, width=width, label=strat, color=_COLORS.get(strat))
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(scenes))])
        ax.set_xticklabels([f"scene {s}" for s in scenes], fontsize=8)
        ax.set_ylabel("buffered samples")
        ax.set_title(f"final buffer composition, capacity {size}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"distribution_B{size}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_stage_accuracy(record: "RunRecord", out: Path) -> list[Path]:
    """Per-scene accuracy across training stages, one panel grid per size."""
    paths = []
    scenes = record.order
    n = len(scenes)
    for size in _sizes(record):
        strategies = [s for s in _strategies(record) if _seeds(record, s, size)]
        if not strategies:
            continue
        cols = min(4, n)
        rows = (n + cols - 1) // cols
        fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False)
        for i in range(n):
            ax = axes[i // cols][i % cols]
            for strat in strategies:
                stages, means = [], []
                for j in range(i + 1, n + 1):
                    vals = []
                    for seed in _seeds(record, strat, size):
                        m = record.cells[(strat, size, seed)].accuracy
                        if m is not None and m.defined(i + 1, j):
                            vals.append(m.get(i + 1, j))
                    if vals:
                        stages.append(j)
                        means.append(sum(vals) / len(vals))
                ax.plot(stages, means, marker="o", ms=3, label=strat, color=_COLORS.get(strat))
            ax.set_title(f"scene {scenes[i]}", fontsize=9)
            ax.set_ylim(-0.05, 1.05)
            ax.set_xlabel("stage", fontsize=8)
            ax.tick_params(labelsize=8)
        for idx in range(n, rows * cols):
            axes[idx // cols][idx % cols].axis("off")
        axes[0][0].legend(fontsize=7)
        fig.suptitle(f"accuracy per scene at each stage, capacity {size}", fontsize=10)
        fig.tight_layout()
        path = out / f"stage_accuracy_B{size}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_coverage(record: "RunRecord", out: Path) -> list[Path]:
    """Mean final coverage versus buffer size, one line per strategy."""
    sizes = _sizes(record)
    strategies = _strategies(record)
    if not sizes or not strategies:
        return []
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for strat in strategies:
        xs, ys = [], []
        for size in sizes:
            vals = []
            for seed in _seeds(record, strat, size):
                hist = record.cells[(strat, size, seed)].coverage_history
                if hist:
                    vals.append(hist[-1].average)
            if vals:
                xs.append(size)
                ys.append(sum(vals) / len(vals))
        ax.plot(xs, ys, marker="o", label=strat, color=_COLORS.get(strat))
    ax.set_xscale("log", base=2)
    ax.set_xticks(sizes, [str(s) for s in sizes])
    ax.set_xlabel("buffer capacity")
    ax.set_ylabel("mean coverage (level 1)")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "coverage.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_all(record: "RunRecord", out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    paths.extend(render_distribution(record, out))
    paths.extend(render_stage_accuracy(record, out))
    paths.extend(render_coverage(record, out))
    return paths
