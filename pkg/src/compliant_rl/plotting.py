"""SVG learning curves from run directories.

Smoothing is applied here only; stored metrics stay raw. The moving average
puts its weight on history: ``s_t = 0.6 * s_{t-1} + 0.4 * x_t``.
"""
from __future__ import annotations

import logging
import typing as t
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from compliant_rl.experiments import (  # noqa: E402
    EMA_WEIGHT,
    GRID_POINTS,
    ema,
    load_metrics,
    load_summary,
    mean_curve,
)

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "compliant-rl"


def run_label(run_dir: t.Union[str, Path]) -> str:
    summary = load_summary(run_dir)
    if "model" not in summary:
        return Path(run_dir).name
    penalty = "penalized" if summary.get("penalize_collisions", True) else "non-penalized"
    return f"{summary['model']} ({penalty})"


def group_runs(
    run_dirs: t.Sequence[t.Union[str, Path]],
) -> t.Dict[str, t.List[pd.DataFrame]]:
    """Metrics frames keyed by label, in first-seen order; unreadable runs are skipped."""
    groups: t.Dict[str, t.List[pd.DataFrame]] = {}
    for run_dir in run_dirs:
        frame = load_metrics(run_dir)
        if frame is None:
            continue
        groups.setdefault(run_label(run_dir), []).append(frame)
    return groups


def smoothed_curves(
    groups: t.Mapping[str, t.Sequence[pd.DataFrame]],
    weight: float = EMA_WEIGHT,
    points: int = GRID_POINTS,
) -> t.Dict[str, pd.DataFrame]:
    curves = {}
    for label, frames in groups.items():
        curve = mean_curve(frames, label, points)
        curve["mean"] = ema(curve["mean"].to_numpy(), weight)
        curve["std"] = ema(curve["std"].to_numpy(), weight)
        curves[label] = curve
    return curves


def plot_learning_curves(
    run_dirs: t.Sequence[t.Union[str, Path]],
    output: t.Union[str, Path],
    weight: float = EMA_WEIGHT,
    title: str = "Average cumulative reward per episode",
) -> t.Optional[Path]:
    """Write one bold mean curve per model with a one-std band when it has several runs.

    Returns the SVG path, or ``None`` when no run had readable metrics.
    """
    curves = smoothed_curves(group_runs(run_dirs), weight)
    if not curves:
        logger.warning(f"No metrics found in {len(run_dirs)} run directories; nothing to plot")
        return None

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 5))
        for label, curve in curves.items():
            steps = curve["global_step"].to_numpy()
            mean = curve["mean"].to_numpy()
            (line,) = ax.plot(steps, mean, linewidth=2.5, label=label)
            if int(curve["runs"].iloc[0]) > 1:
                std = curve["std"].to_numpy()
                ax.fill_between(steps, mean - std, mean + std, color=line.get_color(), alpha=0.2)
        ax.set_xlabel("Training steps")
        ax.set_ylabel("Cumulative reward")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(output, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote learning curves for {len(curves)} group(s) to {output}")
    return output
