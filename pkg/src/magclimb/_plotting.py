from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402

__all__ = ["plot_schedules", "plot_training_curves"]

_SCHEDULE_PANELS = (
    ("theta_deg", "Wall angle [deg]"),
    ("prob_attach", "Attachment probability"),
    ("kappa", "Scaling factor"),
)
_CURVE_PANELS = (
    ("mean_reward", "Mean reward"),
    ("success_rate", "Success rate"),
    ("theta", "Wall angle [rad]"),
    ("prob_attach", "Attachment probability"),
)


def _require(df: pd.DataFrame, columns: list[str]) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ValueError(f"Missing columns `{missing}`. Available columns are: `{list(df.columns)}`.")


def _save(fig: plt.Figure, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_schedules(table: pd.DataFrame, path: str | Path) -> Path:
    """Plot the curriculum table produced by :meth:`~magclimb.CurriculumSchedule.table` against the iteration."""
    _require(table, ["iteration", *(c for c, _ in _SCHEDULE_PANELS)])
    fig, axes = plt.subplots(len(_SCHEDULE_PANELS), 1, sharex=True, figsize=(6, 6))
    for ax, (column, label) in zip(axes, _SCHEDULE_PANELS):
        ax.plot(table["iteration"], table[column], lw=1.5)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("Iteration")
    return _save(fig, path)


def plot_training_curves(curves: pd.DataFrame, path: str | Path, smoothing: int = 10) -> Path:
    """Plot reward, success rate and the curriculum values of a training run; the reward is shown smoothed too."""
    _require(curves, ["iteration", *(c for c, _ in _CURVE_PANELS)])
    fig, axes = plt.subplots(2, 2, sharex=True, figsize=(9, 6))
    for ax, (column, label) in zip(np.ravel(axes), _CURVE_PANELS):
        values = curves[column]
        ax.plot(curves["iteration"], values, lw=0.8, alpha=0.5 if column == "mean_reward" else 1.0)
        if column == "mean_reward" and smoothing > 1:
            ax.plot(curves["iteration"], values.rolling(smoothing, min_periods=1).mean(), lw=1.5)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("Iteration")
    return _save(fig, path)
