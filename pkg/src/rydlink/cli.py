"""Command-line interface.

Subcommands: ``run-single``, ``run-two-node``, ``sweep``, ``tomo``,
``report``.  Global flags select the configuration source, seed, mode, and
output directory.  Exit codes: 0 success, 2 configuration error,
3 statistics failure (no herald events), 4 solver non-convergence.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ConfigError, ExperimentConfig, ideal_config, load_config, load_preset
from .experiments import (
    RunResult,
    phase_sweep,
    run_full_report,
    run_heralded_storage,
    run_tomography,
    run_two_node,
)
from .photonics import InputStateId
from .pipeline import StatisticsError
from .tomography import ConvergenceError

EXIT_CONFIG = 2
EXIT_STATISTICS = 3
EXIT_SOLVER = 4


def _resolve_config(
    config_path: str | None, preset: str | None, seed: int | None, mode: str | None
) -> ExperimentConfig:
    if config_path and preset:
        raise ConfigError("give either --config or --preset, not both")
    if config_path:
        cfg = load_config(config_path)
    elif preset:
        cfg = load_preset(preset)
    else:
        cfg = ideal_config()
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if mode is not None:
        overrides["mode"] = mode
    return cfg.with_overrides(**overrides) if overrides else cfg


def _emit(result: RunResult, out: str | None) -> None:
    text = result.report.to_text()
    click.echo(text, nl=False)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text)
        (out_dir / "metrics.csv").write_text(result.report.metrics_csv())
        for name, content in sorted(result.artifacts.items()):
            (out_dir / name).write_text(content)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML configuration file.")
@click.option("--preset", type=str, default=None,
              help="Named built-in preset (e.g. 'reference').")
@click.option("--seed", type=int, default=None, help="Override the RNG seed.")
@click.option("--mode", type=click.Choice(["analytic", "sampled"]), default=None,
              help="Override the evaluation mode.")
@click.option("--out", type=click.Path(), default=None,
              help="Directory for report and CSV artifacts.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, preset: str | None,
         seed: int | None, mode: str | None, out: str | None) -> None:
    """Heralded-storage quantum link simulator."""
    ctx.ensure_object(dict)
    ctx.obj["args"] = (config_path, preset, seed, mode)
    ctx.obj["out"] = out


def _run(ctx: click.Context, runner) -> None:
    try:
        cfg = _resolve_config(*ctx.obj["args"])
        result = runner(cfg)
        _emit(result, ctx.obj["out"])
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except StatisticsError as exc:
        click.echo(f"statistics failure: {exc}", err=True)
        sys.exit(EXIT_STATISTICS)
    except ConvergenceError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)


@main.command("run-single")
@click.option("--input", "input_name", default="D",
              type=click.Choice([s.name for s in InputStateId]),
              help="Benchmark input state.")
@click.pass_context
def run_single(ctx: click.Context, input_name: str) -> None:
    """Heralded storage and tomography of one input state."""
    _run(ctx, lambda cfg: run_heralded_storage(cfg, InputStateId[input_name]))


@main.command("run-two-node")
@click.pass_context
def run_two_node_cmd(ctx: click.Context) -> None:
    """Remote-entanglement protocol with verification sweeps."""
    _run(ctx, run_two_node)


@main.command("sweep")
@click.option("--protocol", type=click.Choice(["single", "two-node"]), default="single")
@click.pass_context
def sweep(ctx: click.Context, protocol: str) -> None:
    """Phase sweep of the coincidence fringes."""
    name = protocol.replace("-", "_")
    _run(ctx, lambda cfg: phase_sweep(cfg, name))


@main.command("tomo")
@click.pass_context
def tomo(ctx: click.Context) -> None:
    """Six-state benchmark and process tomography."""
    _run(ctx, run_tomography)


@main.command("report")
@click.pass_context
def report(ctx: click.Context) -> None:
    """Full battery: single-node suite plus the two-node protocol."""
    _run(ctx, run_full_report)


if __name__ == "__main__":  # pragma: no cover
    main()
