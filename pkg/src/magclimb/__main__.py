import sys
from pathlib import Path
from typing import Any

import click
from loguru import logger

from magclimb._config import ClimbConfig, ConfigError, load_config
from magclimb._curriculum import CurriculumSchedule
from magclimb.constants._constants import Ablation, Baseline
from magclimb.constants._pkg_constants import Key
from magclimb.evaluation._log import CorruptLogError
from magclimb.learning._checkpoint import CheckpointError
from magclimb.learning._ppo import NonFiniteLoss

_SINKS: list[int] = []
_RUNTIME_ERRORS = (CheckpointError, CorruptLogError, NonFiniteLoss, RuntimeError, OSError)


class _Cli(click.Group):
    """Group mapping usage and configuration errors to exit code 1 and runtime failures to exit code 2."""

    def main(self, *args: Any, **kwargs: Any) -> Any:
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        except click.UsageError as e:
            e.show()
            sys.exit(1)
        except ConfigError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)
        except click.ClickException as e:
            e.show()
            sys.exit(2)
        except _RUNTIME_ERRORS as e:
            logger.error(f"{type(e).__name__}: {e}")
            sys.exit(2)
        finally:
            _close_file_sinks()
        sys.exit(rv if isinstance(rv, int) else 0)


def _setup_logging(verbose: bool) -> None:
    try:
        logger.remove(0)
    except ValueError:
        pass
    for sink in _SINKS:
        logger.remove(sink)
    _SINKS.clear()
    _SINKS.append(logger.add(sys.stderr, level="DEBUG" if verbose else "INFO"))


def _open_run_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    _SINKS.append(logger.add(path / Key.run.log, level="DEBUG", mode="w"))
    return path


def _close_file_sinks() -> None:
    # the stderr sink is the first one
    for sink in _SINKS[1:]:
        logger.remove(sink)
    del _SINKS[1:]


def _parse_floats(ctx: click.Context, param: click.Parameter, value: str | None) -> tuple[float, ...] | None:
    if value is None:
        return None
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, found `{value}`") from None


@click.group(cls=_Cli)
@click.option("--verbose", "-v", is_flag=True, default=False, help="Log debug messages to stderr.")
def cli(verbose: bool) -> None:
    """Train, evaluate and inspect magnetic wall-climbing policies."""
    _setup_logging(verbose)


def main() -> None:
    """Run the magclimb CLI."""
    cli()


@cli.command(help="Train a climbing policy with the curriculum.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI configuration file.")
@click.option("--seed", type=int, help="Random seed.")
@click.option("--out", type=click.Path(file_okay=False), help="Run directory.")
@click.option("--scale", type=float, help="Curriculum breakpoint scale factor in (0, 1].")
@click.option("--ablation", type=click.Choice([a.v for a in Ablation]), help="Training variant.")
@click.option("--iterations", type=int, help="Number of iterations, the scaled curriculum length by default.")
@click.option("--num-envs", type=int, help="Number of parallel environments.")
@click.option("--stage-limit", type=click.IntRange(1, 3), help="Last curriculum phase to train.")
@click.option("--oracle-contact", is_flag=True, default=None, help="Gate adhesion on the true contact state.")
@click.option("--workers", type=int, help="Number of threads.")
@click.option("--plot/--no-plot", default=True, help="Render the training curves to PNG.")
def train(
    config_path: str | None,
    seed: int | None,
    out: str | None,
    scale: float | None,
    ablation: str | None,
    iterations: int | None,
    num_envs: int | None,
    stage_limit: int | None,
    oracle_contact: bool | None,
    workers: int | None,
    plot: bool,
) -> None:
    """
    Train a climbing policy.

    Writes the configuration snapshot, the training curves and checkpoints into the run directory.
    """
    from magclimb.learning._train import train as run_training

    config = load_config(
        config_path,
        {
            "train.seed": seed,
            "curriculum.scale": scale,
            "train.ablation": ablation,
            "train.iterations": iterations,
            "train.num_envs": num_envs,
            "curriculum.stage_limit": stage_limit,
            "train.oracle_contact": oracle_contact,
            "train.workers": workers,
        },
    )
    run_dir = _open_run_dir(Path(out) if out else Path("runs") / f"train-{config.config_hash}-s{config.train.seed}")
    curves = run_training(config, run_dir, plot=plot)
    click.echo(f"Trained {len(curves)} iterations, curves in {run_dir / Key.run.curves}")


def _labels(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        out.append(name if seen[name] == 1 else f"{name} #{seen[name]}")
    return out


@cli.command(name="eval", help="Evaluate policies or the scripted baseline.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI configuration file.")
@click.option("--checkpoint", "checkpoints", multiple=True, type=click.Path(dir_okay=False), help="Policy checkpoint.")
@click.option("--baseline", type=click.Choice([b.v for b in Baseline]), help="Evaluate a non-learned controller.")
@click.option("--out", type=click.Path(file_okay=False), help="Run directory.")
@click.option("--seed", type=int, help="Evaluation seed.")
@click.option("--episodes", type=int, help="Episodes per condition and probability.")
@click.option("--horizon", type=float, help="Episode horizon in seconds.")
@click.option("--prob", callback=_parse_floats, help="Comma-separated attachment probabilities.")
@click.option("--dt", "windows", callback=_parse_floats, help="Comma-separated recovery windows in seconds.")
@click.option("--require-survival", is_flag=True, default=None, help="Recovery also requires surviving the window.")
@click.option("--hardware-debounce", is_flag=True, default=None, help="Emulate the deployed magnet switching rule.")
@click.option("--oracle-contact", is_flag=True, default=None, help="Gate adhesion on the true contact state.")
@click.option("--workers", type=int, help="Number of worker processes.")
def evaluate(
    config_path: str | None,
    checkpoints: tuple[str, ...],
    baseline: str | None,
    out: str | None,
    seed: int | None,
    episodes: int | None,
    horizon: float | None,
    prob: tuple[float, ...] | None,
    windows: tuple[float, ...] | None,
    require_survival: bool | None,
    hardware_debounce: bool | None,
    oracle_contact: bool | None,
    workers: int | None,
) -> None:
    """
    Evaluate controllers with the metric suite.

    Each checkpoint is labelled with the training variant stored in it. The configuration defaults to the one
    embedded in the first checkpoint; file values and flags override it.
    """
    from magclimb.evaluation._metrics import format_report
    from magclimb.evaluation._runner import ControllerSpec, EvalProtocol, evaluate as run_evaluation
    from magclimb.learning._checkpoint import load_checkpoint

    if not checkpoints and baseline is None:
        raise click.UsageError("Specify at least one `--checkpoint` or `--baseline`.")
    controllers, names, base = [], [], None
    for path in checkpoints:
        trained, _ = load_checkpoint(path)
        base = base or trained
        names.append(trained.ablation.label)
        controllers.append(ControllerSpec(checkpoint=str(path)))
    if baseline is not None:
        names.append("Scripted crawl")
        controllers.append(ControllerSpec(baseline=baseline))

    config = load_config(
        config_path,
        {
            "eval.seed": seed,
            "eval.episodes": episodes,
            "eval.horizon": horizon,
            "eval.probs": prob,
            "eval.recovery_windows": windows,
            "eval.require_survival": require_survival,
            "eval.hardware_debounce": hardware_debounce,
            "train.oracle_contact": oracle_contact,
            "eval.workers": workers,
        },
        base=base,
    )
    protocol = EvalProtocol.from_config(config.eval)
    run_dir = _open_run_dir(Path(out) if out else Path("runs") / f"eval-{config.config_hash}-s{config.eval.seed}")
    config.dump(run_dir / Key.run.config)
    table, _ = run_evaluation(list(zip(_labels(names), controllers)), config, protocol, run_dir)
    click.echo(f"Protocol: {protocol.tag}")
    click.echo(format_report(table))


@cli.command(help="Tabulate the curriculum schedule.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI configuration file.")
@click.option("--scale", type=float, help="Curriculum breakpoint scale factor in (0, 1].")
@click.option("--ablation", type=click.Choice([a.v for a in Ablation]), help="Training variant.")
@click.option("--at", "at", callback=_parse_floats, help="Comma-separated iterations to evaluate.")
@click.option("--step", type=click.IntRange(min=1), default=100, show_default=True, help="Table spacing.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the table to this file.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), help="Render the table to this PNG file.")
def inspect(
    config_path: str | None,
    scale: float | None,
    ablation: str | None,
    at: tuple[float, ...] | None,
    step: int,
    out: str | None,
    plot_path: str | None,
) -> None:
    """Print the wall angle, attachment probability, scaling factor and phase per iteration."""
    from magclimb.utils._utils import header_lines, write_table

    config: ClimbConfig = load_config(config_path, {"curriculum.scale": scale, "train.ablation": ablation})
    schedule = CurriculumSchedule(config.curriculum, config.ablation)
    try:
        table = schedule.table_at(at) if at else schedule.table(step=step)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--at") from None
    if out:
        write_table(table, out, header_lines(config), float_format="%.17g")
    else:
        click.echo(table.to_csv(sep="\t", index=False, float_format="%.17g", lineterminator="\n"), nl=False)
    if plot_path:
        from magclimb._plotting import plot_schedules

        plot_schedules(table, plot_path)


@cli.command(help="Recompute the metrics of an evaluation run from its episode logs.")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def replay(run_dir: str) -> None:
    """Fail with exit code 2 if the recomputed metrics differ from the stored ones."""
    from magclimb.evaluation._metrics import format_report
    from magclimb.evaluation._runner import replay as run_replay

    table = run_replay(run_dir)
    click.echo(format_report(table))
    click.echo("Metrics match.")


if __name__ == "__main__":
    main()
