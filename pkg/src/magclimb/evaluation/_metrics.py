from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from magclimb.constants import config as defaults
from magclimb.constants._constants import GateReason
from magclimb.evaluation._log import EpisodeLog

__all__ = [
    "METRIC_COLUMNS",
    "aggregate",
    "average_walking_time",
    "early_termination_rate",
    "episode_metrics",
    "format_report",
    "recovery_convention",
    "recovery_key",
    "recovery_rate",
    "report_table",
    "retention",
    "stochastic_failures",
    "velocity_rmse",
    "velocity_rmse_channels",
]

METRIC_COLUMNS = ("condition", "prob", "metric", "mean", "std", "median", "n")

_STOCHASTIC_FAIL = GateReason.STOCHASTIC_FAIL.code


def recovery_key(window: float) -> str:
    return f"recovery_{window:g}"


def velocity_rmse_channels(log: EpisodeLog) -> np.ndarray:
    """Root-mean-square tracking error of ``(v_x, v_y, omega_z)`` separately; ``nan`` for an empty log."""
    if not log.steps:
        return np.full(3, np.nan)
    return np.sqrt(np.mean((log.measured - log.commands) ** 2, axis=0))


def velocity_rmse(log: EpisodeLog) -> float:
    """Root-mean-square error over all three velocity channels stacked; ``nan`` for an empty log."""
    if not log.steps:
        return float("nan")
    return float(np.sqrt(np.mean((log.measured - log.commands) ** 2)))


def retention(log: EpisodeLog) -> float:
    """Percentage of foot stance steps with the holding force applied; ``nan`` without stance."""
    stance = int(log.stance.sum())
    if not stance:
        return float("nan")
    return 100.0 * float((log.stance & log.force_active).sum()) / stance


def stochastic_failures(log: EpisodeLog) -> list[tuple[int, int]]:
    """``(step, leg)`` of every onset of a stochastic attachment failure."""
    failing = log.reasons == _STOCHASTIC_FAIL
    onset = failing & ~np.vstack([np.zeros((1, 4), dtype=bool), failing[:-1]])
    return [(int(k), int(leg)) for k, leg in zip(*np.nonzero(onset))]


def recovery_rate(log: EpisodeLog, window: float, require_survival: bool = False) -> float:
    """
    Percentage of stochastic failures followed by an attachment of the same foot within ``window`` seconds.

    Parameters
    ----------
    log
        Episode to score.
    window
        Recovery window in seconds.
    require_survival
        Additionally require that the episode was not terminated before the window closed. Without it the rate is
        non-decreasing in ``window``.

    Returns
    -------
    The rate, or ``nan`` when the episode holds no failure.
    """
    failures = stochastic_failures(log)
    if not failures:
        return float("nan")
    recovered = 0
    for k, leg in failures:
        t0 = log.time[k]
        later = (log.time > t0) & (log.time <= t0 + window + 1e-9) & log.attached[:, leg]
        ok = bool(later.any())
        if ok and require_survival and log.terminated:
            ok = log.duration >= t0 + window - 1e-9
        recovered += ok
    return 100.0 * recovered / len(failures)


def early_termination_rate(logs: Sequence[EpisodeLog]) -> float:
    if not logs:
        raise ValueError("Expected at least one episode log.")
    return 100.0 * sum(log.terminated for log in logs) / len(logs)


def average_walking_time(logs: Sequence[EpisodeLog]) -> float:
    if not logs:
        raise ValueError("Expected at least one episode log.")
    return float(np.mean([log.walking_time for log in logs]))


def episode_metrics(
    log: EpisodeLog,
    windows: Iterable[float] = defaults.RECOVERY_WINDOWS,
    require_survival: bool = False,
) -> dict[str, float]:
    """All per-episode metrics; ``nan`` marks a metric that does not apply to this episode."""
    vx, vy, wz = velocity_rmse_channels(log)
    out = {
        "vel_rmse": velocity_rmse(log),
        "vel_rmse_vx": float(vx),
        "vel_rmse_vy": float(vy),
        "vel_rmse_wz": float(wz),
        "early_termination": 100.0 * log.terminated,
        "walking_time": log.walking_time,
        "retention": retention(log),
    }
    for w in windows:
        out[recovery_key(w)] = recovery_rate(log, w, require_survival)
    return out


def aggregate(
    logs: Sequence[EpisodeLog],
    windows: Iterable[float] = defaults.RECOVERY_WINDOWS,
    require_survival: bool = False,
    condition: str = "",
    prob: float = float("nan"),
) -> pd.DataFrame:
    """
    Mean, standard deviation and median of every metric over ``logs``.

    Episodes where a metric does not apply are excluded from its statistics; ``n`` counts the remaining ones.
    """
    if not logs:
        raise ValueError("Expected at least one episode log.")
    per_episode = pd.DataFrame([episode_metrics(log, windows, require_survival) for log in logs])
    rows = []
    for metric in per_episode.columns:
        values = per_episode[metric].to_numpy(dtype=np.float64)
        values = values[np.isfinite(values)]
        if not len(values):
            logger.warning(f"Metric `{metric}` does not apply to any episode of `{condition}` at prob {prob}")
            stats = (np.nan, np.nan, np.nan)
        else:
            stats = (float(np.mean(values)), float(np.std(values)), float(np.median(values)))
        rows.append((condition, prob, metric, *stats, len(values)))
    return pd.DataFrame(rows, columns=list(METRIC_COLUMNS))


def report_table(results: Mapping[tuple[str, float], Sequence[EpisodeLog]], **kwargs: object) -> pd.DataFrame:
    """Long-form metrics of several ``(condition, prob)`` groups, in insertion order."""
    frames = [aggregate(logs, condition=cond, prob=prob, **kwargs) for (cond, prob), logs in results.items()]
    table = pd.concat(frames, ignore_index=True)
    table.attrs["require_survival"] = bool(kwargs.get("require_survival", False))
    return table


def recovery_convention(require_survival: bool) -> str:
    """One-line description of how recovery rates are counted."""
    if require_survival:
        return "same-foot reattachment within the window, episode alive when the window closes"
    return "same-foot reattachment within the window, later termination ignored"


_SCALE = {"vel_rmse": 4, "early_termination": 2, "walking_time": 2, "retention": 2}


def format_report(table: pd.DataFrame, require_survival: bool | None = None) -> str:
    """
    Human-readable grid: one row per condition and attachment probability, one ``mean ± std`` column per metric.

    Per-channel velocity errors and medians are left to the tabular file. A closing line names the recovery
    convention, taken from ``require_survival`` or from the table built by :func:`report_table`.
    """
    if require_survival is None:
        require_survival = table.attrs.get("require_survival")
    shown = table[~table["metric"].str.startswith("vel_rmse_")]
    blocks = []
    for prob, group in shown.groupby("prob", sort=False):
        cells = group.assign(
            cell=[
                "n/a" if not np.isfinite(m) else f"{m:.{_SCALE.get(name, 2)}f} ± {s:.{_SCALE.get(name, 2)}f}"
                for name, m, s in zip(group["metric"], group["mean"], group["std"])
            ]
        )
        grid = cells.pivot(index="condition", columns="metric", values="cell")
        grid = grid.reindex(index=list(dict.fromkeys(cells["condition"])), columns=list(dict.fromkeys(cells["metric"])))
        blocks.append(f"Prob_attach = {prob:g}\n{grid.to_string()}")
    if require_survival is not None:
        blocks.append(f"Recovery: {recovery_convention(require_survival)}")
    return "\n\n".join(blocks)
