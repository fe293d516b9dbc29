"""Internal constants not exposed to the user."""

from collections.abc import Callable
from typing import Any

_SEP = "_"


class cprop:
    def __init__(self, f: Callable[..., str]):
        self.f = f

    def __get__(self, obj: Any, owner: Any) -> str:
        return self.f(owner)


class Key:
    class run:
        @cprop
        def config(cls) -> str:
            return "config.ini"

        @cprop
        def curves(cls) -> str:
            return "curves.tsv"

        @cprop
        def curves_plot(cls) -> str:
            return "curves.png"

        @cprop
        def log(cls) -> str:
            return "run.log"

        @cprop
        def metrics(cls) -> str:
            return "metrics.tsv"

        @cprop
        def checkpoints(cls) -> str:
            return "checkpoints"

        @cprop
        def episodes(cls) -> str:
            return "episodes"

        @classmethod
        def checkpoint(cls, iteration: int) -> str:
            return f"model{_SEP}{iteration:06d}.pt"

        @classmethod
        def episode_log(cls, condition: str, prob: float, index: int) -> str:
            return f"{condition}{_SEP}p{prob:.2f}{_SEP}{index:03d}.jsonl"

    class record:
        @cprop
        def header(cls) -> str:
            return "header"

        @cprop
        def step(cls) -> str:
            return "step"

        @cprop
        def end(cls) -> str:
            return "end"

    class checkpoint:
        @cprop
        def config_hash(cls) -> str:
            return "config_hash"

        @cprop
        def version(cls) -> str:
            return "version"

        @cprop
        def iteration(cls) -> str:
            return "iteration"

        @cprop
        def actor_critic(cls) -> str:
            return "actor_critic"

        @cprop
        def estimator(cls) -> str:
            return "estimator"

        @cprop
        def optimizer(cls) -> str:
            return "optimizer"

        @cprop
        def generator(cls) -> str:
            return "generator"
