from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from magclimb.constants._constants import LEGS, GateReason, TerminationCause
from magclimb.constants._pkg_constants import Key
from magclimb.utils._utils import artifact_version

__all__ = ["CorruptLogError", "EpisodeLog", "read_episode_log", "read_episode_logs", "write_episode_log"]

STEP_FIELDS = ("t", "command", "measured", "stance", "attached", "force_active", "reason")


class CorruptLogError(ValueError):
    """Malformed episode log; ``record`` is the 1-based line number of the offending record."""

    def __init__(self, path: str | Path, record: int, message: str):
        self.path, self.record = Path(path), record
        super().__init__(f"Corrupt episode log `{path}`, record {record}: {message}")


@dataclass
class EpisodeLog:
    """
    Per control step record of one evaluation episode.

    Velocities are ``(v_x, v_y, omega_z)`` in the base frame; per-foot arrays are ``(steps, 4)`` in leg order.
    """

    time: np.ndarray
    commands: np.ndarray
    measured: np.ndarray
    stance: np.ndarray
    attached: np.ndarray
    force_active: np.ndarray
    reasons: np.ndarray
    cause: TerminationCause = TerminationCause.NONE
    duration: float = 0.0
    horizon: float = 10.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.cause = TerminationCause(self.cause)
        steps = len(self.time)
        for name in ("commands", "measured"):
            if getattr(self, name).shape != (steps, 3):
                raise ValueError(f"Expected `{name}` of shape `{(steps, 3)}`, found `{getattr(self, name).shape}`.")
        for name in ("stance", "attached", "force_active", "reasons"):
            if getattr(self, name).shape != (steps, 4):
                raise ValueError(f"Expected `{name}` of shape `{(steps, 4)}`, found `{getattr(self, name).shape}`.")
        if steps and np.any(np.diff(self.time) <= 0):
            raise ValueError("Timestamps must be strictly increasing.")
        if self.duration > self.horizon + 1e-9:
            raise ValueError(f"Duration `{self.duration}` exceeds the horizon `{self.horizon}`.")

    @classmethod
    def empty(cls, horizon: float = 10.0, **meta: Any) -> EpisodeLog:
        return cls(
            time=np.zeros(0),
            commands=np.zeros((0, 3)),
            measured=np.zeros((0, 3)),
            stance=np.zeros((0, 4), dtype=bool),
            attached=np.zeros((0, 4), dtype=bool),
            force_active=np.zeros((0, 4), dtype=bool),
            reasons=np.zeros((0, 4), dtype=int),
            horizon=horizon,
            meta=dict(meta),
        )

    @property
    def steps(self) -> int:
        return len(self.time)

    @property
    def terminated(self) -> bool:
        return self.cause is not TerminationCause.NONE

    @property
    def walking_time(self) -> float:
        return min(self.duration, self.horizon)


def _step_record(log: EpisodeLog, k: int) -> dict[str, Any]:
    return {
        "record": Key.record.step,
        "t": float(log.time[k]),
        "command": [float(v) for v in log.commands[k]],
        "measured": [float(v) for v in log.measured[k]],
        "stance": [int(v) for v in log.stance[k]],
        "attached": [int(v) for v in log.attached[k]],
        "force_active": [int(v) for v in log.force_active[k]],
        "reason": [GateReason.from_code(c).v for c in log.reasons[k]],
    }


def write_episode_log(log: EpisodeLog, path: str | Path, config_hash: str) -> Path:
    """
    Write ``log`` as line-delimited JSON: one header record, one record per step and one end record.

    Step records carry the keys ``t, command, measured, stance, attached, force_active, reason`` in this order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "record": Key.record.header,
        "version": artifact_version(),
        "config_hash": config_hash,
        "horizon": log.horizon,
        "legs": list(LEGS),
        "fields": list(STEP_FIELDS),
        **log.meta,
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        for k in range(log.steps):
            fh.write(json.dumps(_step_record(log, k)) + "\n")
        fh.write(json.dumps({"record": Key.record.end, "cause": log.cause.v, "duration": log.duration}) + "\n")
    logger.debug(f"Wrote episode log {path} ({log.steps} steps, cause {log.cause.v})")
    return path


def read_episode_log(path: str | Path) -> EpisodeLog:
    """
    Read a log written by :func:`write_episode_log`.

    Raises
    ------
    CorruptLogError
        On malformed JSON, missing keys, unknown values, non-increasing timestamps or a missing header or end record.
    """
    path = Path(path)
    rows: list[dict[str, Any]] = []
    header: dict[str, Any] | None = None
    end: dict[str, Any] | None = None
    last_t = -np.inf
    with path.open(encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            try:
                rec = json.loads(line)
                kind = rec["record"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorruptLogError(path, index, f"unreadable record ({e})") from None
            if end is not None:
                raise CorruptLogError(path, index, "record after the end record")
            if kind == Key.record.header:
                if index != 1:
                    raise CorruptLogError(path, index, "header is not the first record")
                header = rec
            elif header is None:
                raise CorruptLogError(path, index, "missing header record")
            elif kind == Key.record.step:
                try:
                    row = {
                        "t": float(rec["t"]),
                        "command": [float(v) for v in rec["command"]],
                        "measured": [float(v) for v in rec["measured"]],
                        "stance": [bool(v) for v in rec["stance"]],
                        "attached": [bool(v) for v in rec["attached"]],
                        "force_active": [bool(v) for v in rec["force_active"]],
                        "reason": [GateReason(v).code for v in rec["reason"]],
                    }
                except (KeyError, TypeError, ValueError) as e:
                    raise CorruptLogError(path, index, f"invalid step record ({e})") from None
                if len(row["command"]) != 3 or len(row["measured"]) != 3 or any(
                    len(row[k]) != 4 for k in ("stance", "attached", "force_active", "reason")
                ):
                    raise CorruptLogError(path, index, "wrong number of entries")
                if not row["t"] > last_t:
                    raise CorruptLogError(path, index, f"timestamp `{row['t']}` does not increase")
                last_t = row["t"]
                rows.append(row)
            elif kind == Key.record.end:
                try:
                    end = {"cause": TerminationCause(rec["cause"]), "duration": float(rec["duration"])}
                except (KeyError, TypeError, ValueError) as e:
                    raise CorruptLogError(path, index, f"invalid end record ({e})") from None
            else:
                raise CorruptLogError(path, index, f"unknown record type `{kind}`")
    if header is None:
        raise CorruptLogError(path, 1, "missing header record")
    if end is None:
        raise CorruptLogError(path, len(rows) + 2, "missing end record")

    meta = {k: v for k, v in header.items() if k not in ("record", "horizon", "legs", "fields")}
    try:
        log = EpisodeLog.empty(float(header["horizon"]), **meta)
        if rows:
            log = EpisodeLog(
                time=np.array([r["t"] for r in rows]),
                commands=np.array([r["command"] for r in rows]),
                measured=np.array([r["measured"] for r in rows]),
                stance=np.array([r["stance"] for r in rows], dtype=bool),
                attached=np.array([r["attached"] for r in rows], dtype=bool),
                force_active=np.array([r["force_active"] for r in rows], dtype=bool),
                reasons=np.array([r["reason"] for r in rows], dtype=int),
                horizon=log.horizon,
                meta=meta,
            )
        log.cause, log.duration = end["cause"], end["duration"]
    except (KeyError, ValueError) as e:
        raise CorruptLogError(path, 1, str(e)) from None
    if log.duration > log.horizon + 1e-9:
        raise CorruptLogError(path, len(rows) + 2, f"duration `{log.duration}` exceeds the horizon")
    return log


def read_episode_logs(directory: str | Path) -> list[EpisodeLog]:
    """All ``*.jsonl`` logs of ``directory`` in file name order."""
    paths = sorted(Path(directory).glob("*.jsonl"))
    logger.info(f"Reading {len(paths)} episode logs from {directory}")
    return [read_episode_log(p) for p in paths]
