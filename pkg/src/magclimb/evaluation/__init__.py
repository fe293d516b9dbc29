from magclimb.evaluation._baseline import ScriptedCrawl, crawl_foot_targets
from magclimb.evaluation._log import CorruptLogError, EpisodeLog, read_episode_log, read_episode_logs, write_episode_log
from magclimb.evaluation._metrics import (
    aggregate,
    average_walking_time,
    early_termination_rate,
    episode_metrics,
    format_report,
    recovery_convention,
    recovery_rate,
    report_table,
    retention,
    stochastic_failures,
    velocity_rmse,
    velocity_rmse_channels,
)
from magclimb.evaluation._runner import (
    ControllerSpec,
    EvalProtocol,
    ReplayMismatch,
    evaluate,
    replay,
    run_block,
    run_episode,
)

__all__ = [
    "ControllerSpec",
    "CorruptLogError",
    "EpisodeLog",
    "EvalProtocol",
    "ReplayMismatch",
    "ScriptedCrawl",
    "aggregate",
    "average_walking_time",
    "crawl_foot_targets",
    "early_termination_rate",
    "episode_metrics",
    "evaluate",
    "format_report",
    "read_episode_log",
    "read_episode_logs",
    "recovery_convention",
    "recovery_rate",
    "replay",
    "report_table",
    "retention",
    "run_block",
    "run_episode",
    "stochastic_failures",
    "velocity_rmse",
    "velocity_rmse_channels",
    "write_episode_log",
]
