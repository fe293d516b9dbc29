from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger

if TYPE_CHECKING:
    from magclimb._config import ClimbConfig

_COMMENT = "#"


def artifact_version() -> str:
    from magclimb import __version__

    return str(__version__)


def header_lines(config: ClimbConfig, **extra: object) -> list[str]:
    """Return the comment lines every emitted file starts with."""
    lines = [f"{_COMMENT} magclimb {artifact_version()} config {config.config_hash}"]
    lines.extend(f"{_COMMENT} {key} {value}" for key, value in extra.items())
    return lines


def read_header(path: str | Path) -> dict[str, str]:
    """Parse the leading comment lines written by :func:`header_lines`."""
    out: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith(_COMMENT):
                break
            tokens = line[len(_COMMENT) :].split()
            if tokens[:1] == ["magclimb"] and len(tokens) >= 4:
                out["version"], out["config_hash"] = tokens[1], tokens[3]
            elif len(tokens) >= 2:
                out[tokens[0]] = " ".join(tokens[1:])
    return out


def write_table(
    df: pd.DataFrame, path: str | Path, header: Sequence[str] = (), float_format: str = "%.10g"
) -> Path:
    """Write a tab separated table preceded by ``header`` comment lines; ``"%.17g"`` round-trips floats exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(f"{line}\n")
        df.to_csv(fh, sep="\t", index=False, float_format=float_format, lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def read_table(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, sep="\t", comment=_COMMENT, float_precision="round_trip")


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-instance generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def seed_everything(seed: int) -> np.random.Generator:
    import torch

    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def nonfinite_rows(*arrays: np.ndarray) -> np.ndarray:
    """Indices along the first axis where any of ``arrays`` holds a non-finite value."""
    bad = np.zeros(len(arrays[0]), dtype=bool)
    for arr in arrays:
        bad |= ~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1)
    return np.flatnonzero(bad)


def wrap_to_2pi(angle: np.ndarray | float) -> np.ndarray:
    return np.mod(angle, 2.0 * np.pi)


def parse_floats(value: str | Iterable[float]) -> tuple[float, ...]:
    """Parse ``"1.2,2.4"`` or an iterable of numbers into a tuple of floats."""
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(",") if v.strip())
    return tuple(float(v) for v in value)
