from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from magclimb._config import ClimbConfig, ConfigError, EvalConfig
from magclimb._curriculum import CurriculumState
from magclimb._env import ClimbEnv
from magclimb._observation import Observation
from magclimb.constants import config as defaults
from magclimb.constants._constants import Ablation, Baseline, TerminationCause
from magclimb.constants._pkg_constants import Key
from magclimb.evaluation._baseline import ScriptedCrawl
from magclimb.evaluation._log import EpisodeLog, read_episode_logs, write_episode_log
from magclimb.evaluation._metrics import format_report, recovery_convention, report_table
from magclimb.learning._checkpoint import Policy
from magclimb.learning._networks import CONTACT_SLICE
from magclimb.utils._utils import header_lines, parse_floats, read_header, read_table, write_table

__all__ = [
    "Controller",
    "ControllerSpec",
    "EvalProtocol",
    "ReplayMismatch",
    "evaluate",
    "replay",
    "run_block",
    "run_episode",
]

Controller = Callable[[Observation, ClimbEnv], tuple[np.ndarray, "np.ndarray | None"]]

# episodes simulated together in one vectorised environment; independent of the worker count
BLOCK_SIZE = 25
FULL_PROTOCOL_EPISODES = 100


class ReplayMismatch(RuntimeError):
    """Metrics recomputed from stored episode logs differ from the stored report."""


@dataclass(frozen=True)
class EvalProtocol:
    horizon: float = defaults.EPISODE_LENGTH
    episodes: int = FULL_PROTOCOL_EPISODES
    probs: tuple[float, ...] = defaults.EVAL_PROBS
    windows: tuple[float, ...] = defaults.RECOVERY_WINDOWS
    seed: int = 1000
    require_survival: bool = False
    hardware_debounce: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ConfigError("eval.horizon", f"must be positive, found `{self.horizon}`")
        if self.episodes < 1:
            raise ConfigError("eval.episodes", f"expected at least one episode, found `{self.episodes}`")
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            raise ConfigError("eval.probs", f"probabilities must lie in [0, 1], found `{self.probs}`")

    @classmethod
    def from_config(cls, cfg: EvalConfig) -> EvalProtocol:
        return cls(
            horizon=cfg.horizon,
            episodes=cfg.episodes,
            probs=tuple(cfg.probs),
            windows=tuple(cfg.recovery_windows),
            seed=cfg.seed,
            require_survival=cfg.require_survival,
            hardware_debounce=cfg.hardware_debounce,
            workers=cfg.workers,
        )

    @property
    def tag(self) -> str:
        if self.episodes >= FULL_PROTOCOL_EPISODES:
            return "full"
        return f"sub-protocol (N={self.episodes})"

    def apply(self, config: ClimbConfig) -> ClimbConfig:
        """
        Configuration the episodes run with.

        The horizon becomes the episode length and adhesion is always fully modelled, whatever ablation the
        controller was trained under. The hardware magnet rule is switched on when requested.
        """
        train = replace(config.train, episode_length=self.horizon, ablation=Ablation.FULL.v)
        adhesion = config.adhesion
        if self.hardware_debounce:
            adhesion = replace(adhesion, debounce_time=defaults.HARDWARE_DEBOUNCE_TIME)
        return replace(config, train=train, adhesion=adhesion).validate()


@dataclass(frozen=True)
class ControllerSpec:
    """Picklable description of a controller, built inside every worker."""

    baseline: str | None = None
    checkpoint: str | None = None

    def __post_init__(self) -> None:
        if (self.baseline is None) == (self.checkpoint is None):
            raise ValueError("Specify exactly one of `baseline` and `checkpoint`.")
        if self.baseline is not None:
            Baseline(self.baseline)

    def build(self) -> Controller:
        if self.baseline is not None:
            return ScriptedCrawl()
        policy, _ = Policy.from_checkpoint(self.checkpoint)

        def controller(obs: Observation, env: ClimbEnv) -> tuple[np.ndarray, np.ndarray]:
            actions, estimate = policy(obs)
            return actions, estimate[:, CONTACT_SLICE]

        return controller


def run_block(
    controller: Controller,
    config: ClimbConfig,
    n: int,
    prob: float = 1.0,
    seed: int = 0,
    horizon: float = defaults.EPISODE_LENGTH,
    schedule: CurriculumState | None = None,
    meta: dict[str, object] | None = None,
) -> list[EpisodeLog]:
    """
    Run ``n`` evaluation episodes side by side.

    Every instance stops being logged at its first termination or at ``horizon``. The schedule defaults to the
    vertical wall with adhesion attempts succeeding with probability ``prob``.
    """
    env = ClimbEnv(config, n=n, seed=seed, auto_reset=False)
    env.episode_length = horizon
    env.set_schedule(schedule or CurriculumState.vertical(prob))
    obs, _ = env.reset()

    records: dict[str, list[np.ndarray]] = {
        k: [] for k in ("time", "commands", "measured", "stance", "attached", "force_active", "reasons")
    }
    lengths = np.zeros(n, dtype=int)
    causes = np.full(n, TerminationCause.NONE.code)
    durations = np.zeros(n)
    active = np.ones(n, dtype=bool)
    for _ in range(int(np.ceil(horizon / env.control_dt - 1e-9))):
        actions, confidence = controller(obs, env)
        result = env.step(actions, confidence)
        for key in records:
            records[key].append(getattr(result, key).copy())
        lengths[active] += 1
        finished = active & result.dones
        causes[finished] = result.causes[finished]
        durations[finished] = np.minimum(result.durations[finished], horizon)
        active &= ~result.dones
        if not active.any():
            break
        obs = result.observation
    durations[active] = np.minimum(env.episode_time[active], horizon)

    stacked = {k: np.stack(v, axis=1) for k, v in records.items()}
    logs = []
    for i in range(n):
        k = lengths[i]
        logs.append(
            EpisodeLog(
                time=stacked["time"][i, :k],
                commands=stacked["commands"][i, :k],
                measured=stacked["measured"][i, :k],
                stance=stacked["stance"][i, :k],
                attached=stacked["attached"][i, :k],
                force_active=stacked["force_active"][i, :k],
                reasons=stacked["reasons"][i, :k],
                cause=TerminationCause.from_code(causes[i]),
                duration=float(durations[i]),
                horizon=horizon,
                meta={**(meta or {}), "prob": prob, "seed": seed, "instance": i},
            )
        )
    logger.debug(
        f"Block seed={seed} prob={prob}: {sum(log.terminated for log in logs)}/{n} episodes terminated early"
    )
    return logs


def run_episode(
    controller: Controller,
    config: ClimbConfig | None = None,
    prob: float = 1.0,
    seed: int = 0,
    horizon: float = defaults.EPISODE_LENGTH,
    schedule: CurriculumState | None = None,
) -> EpisodeLog:
    """Run a single evaluation episode; deterministic given ``seed``."""
    config = config or ClimbConfig()
    config = replace(config, train=replace(config.train, episode_length=horizon))
    return run_block(controller, config, 1, prob, seed, horizon, schedule)[0]


def _block_seed(seed: int, prob_index: int, block: int) -> int:
    return int(np.random.SeedSequence([seed, prob_index, block]).generate_state(1)[0])


def _run_job(job: tuple[ControllerSpec, ClimbConfig, int, float, int, float, dict[str, object]]) -> list[EpisodeLog]:
    spec, config, n, prob, seed, horizon, meta = job
    return run_block(spec.build(), config, n, prob, seed, horizon, meta=meta)


def _slug(label: str) -> str:
    return "".join(c for c in label.lower().replace(" ", "-") if c.isalnum() or c == "-")


def evaluate(
    controllers: Sequence[tuple[str, ControllerSpec]],
    config: ClimbConfig,
    protocol: EvalProtocol,
    out_dir: str | Path | None = None,
) -> tuple[pd.DataFrame, dict[tuple[str, float], list[EpisodeLog]]]:
    """
    Evaluate every ``(label, controller)`` at every attachment probability of ``protocol``.

    Episodes are grouped into fixed blocks with disjoint seeds, so results do not depend on ``protocol.workers``.
    When ``out_dir`` is given, every episode log and the metrics table are written there.

    Returns
    -------
    The long-form metrics table and the episode logs per ``(label, prob)``.
    """
    run_config = protocol.apply(config)
    jobs, keys = [], []
    for label, spec in controllers:
        for p_index, prob in enumerate(protocol.probs):
            for block, start in enumerate(range(0, protocol.episodes, BLOCK_SIZE)):
                n = min(BLOCK_SIZE, protocol.episodes - start)
                meta = {"condition": label, "first_episode": start}
                jobs.append((spec, run_config, n, prob, _block_seed(protocol.seed, p_index, block), protocol.horizon, meta))
                keys.append((label, prob))
    logger.info(f"Evaluating {len(controllers)} controllers over {len(jobs)} blocks with {protocol.workers} workers")
    if protocol.workers > 1:
        with ProcessPoolExecutor(max_workers=protocol.workers) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        outputs = [_run_job(job) for job in jobs]

    results: dict[tuple[str, float], list[EpisodeLog]] = {}
    for key, logs in zip(keys, outputs):
        results.setdefault(key, []).extend(logs)
    table = report_table(results, windows=protocol.windows, require_survival=protocol.require_survival)

    if out_dir is not None:
        out_dir = Path(out_dir)
        for (label, prob), logs in results.items():
            for index, log in enumerate(logs):
                log.meta["episode"] = index
                path = out_dir / Key.run.episodes / Key.run.episode_log(_slug(label), prob, index)
                write_episode_log(log, path, run_config.config_hash)
        header = header_lines(
            run_config,
            protocol=protocol.tag.replace(" ", "_"),
            windows=",".join(f"{w:g}" for w in protocol.windows),
            require_survival=protocol.require_survival,
            recovery=recovery_convention(protocol.require_survival),
        )
        write_table(table, out_dir / Key.run.metrics, header, float_format="%.17g")
    logger.info(f"Evaluation ({protocol.tag}):\n{format_report(table)}")
    return table, results


def replay(run_dir: str | Path) -> pd.DataFrame:
    """
    Recompute the metrics of an evaluation run from its stored episode logs.

    Raises
    ------
    ReplayMismatch
        If any recomputed value differs from the stored metrics table.
    CorruptLogError
        If an episode log is malformed.
    """
    run_dir = Path(run_dir)
    stored_path = run_dir / Key.run.metrics
    stored = read_table(stored_path)
    header = read_header(stored_path)
    windows = parse_floats(header.get("windows", ",".join(map(str, defaults.RECOVERY_WINDOWS))))
    require_survival = header.get("require_survival", "False") == "True"

    by_key: dict[tuple[str, float], list[EpisodeLog]] = {}
    for log in read_episode_logs(run_dir / Key.run.episodes):
        by_key.setdefault((str(log.meta["condition"]), float(log.meta["prob"])), []).append(log)
    for logs in by_key.values():
        logs.sort(key=lambda log: int(log.meta.get("episode", 0)))
    order = list(dict.fromkeys(zip(stored["condition"].astype(str), stored["prob"].astype(float))))
    missing = [key for key in order if key not in by_key]
    if missing:
        raise ReplayMismatch(f"No episode logs for `{missing}`.")
    table = report_table({key: by_key[key] for key in order}, windows=windows, require_survival=require_survival)

    numeric = ["mean", "std", "median", "n"]
    same_shape = table.shape == stored.shape and (table["metric"].to_numpy() == stored["metric"].to_numpy()).all()
    if not same_shape or not np.array_equal(
        table[numeric].to_numpy(dtype=np.float64), stored[numeric].to_numpy(dtype=np.float64), equal_nan=True
    ):
        raise ReplayMismatch(f"Metrics recomputed from `{run_dir}` differ from `{stored_path}`.")
    logger.info(f"Replayed {sum(map(len, by_key.values()))} episodes: metrics match `{stored_path}`")
    return table
