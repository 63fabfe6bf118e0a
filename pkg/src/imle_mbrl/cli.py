"""Command-line entry points: train, verify the estimator claims, and
check gradients numerically."""

from __future__ import annotations

import dataclasses
import os

import click

from . import __version__
from .checks import gradient_battery
from .harness import ExperimentConfig, build_config, emit_report, load_config, run_experiment
from .theory import run_verification

OUT_ENV_VAR = "IMLE_MBRL_OUT"


@click.group()
@click.version_option(__version__)
def main():
    """Model-based RL with generative world-model ensembles and
    confidence-weighted agent updates."""


def _config_overrides(command):
    # one flag per config key, applied on top of file values
    for field in reversed(dataclasses.fields(ExperimentConfig)):
        command = click.option(f"--{field.name}", field.name, default=None,
                               type=str, metavar="VALUE",
                               help=f"override config key {field.name}")(command)
    return command


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="flat key=value config file")
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False),
              help=f"output directory (else ${OUT_ENV_VAR} when set)")
@_config_overrides
def run(config_path, out_dir, **overrides):
    """Train one seed; write checkpoints and metric CSVs to the out dir."""
    given = {k: v for k, v in overrides.items() if v is not None}
    try:
        if config_path is not None:
            config = load_config(config_path, given)
        else:
            config = build_config({}, given)
        out = out_dir or os.environ.get(OUT_ENV_VAR) or None
        result = run_experiment(config, out)
        if out is not None:
            emit_report(result.series, config, out)
    except (ValueError, RuntimeError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"env={config.env} model={config.model} seed={config.seed} "
               f"steps={config.steps} horizon={config.resolved_horizon()}")
    for series in result.series:
        if series.name == "eval_return" and series.values:
            click.echo(f"final eval return {series.values[-1]:.3f}")
    if out is not None:
        click.echo(f"report and checkpoints in {out}")


@main.command("verify-theory")
@click.option("--instances", default=1000, show_default=True,
              type=click.IntRange(min=1),
              help="random linear-regression instances")
def verify_theory(instances):
    """Check the weighting claims: fixed-point invariance and minimum
    estimator covariance."""
    report = run_verification(n_instances=instances)
    click.echo(f"fixed-point invariance: {report.mdp_count} MDPs, "
               f"max fixed-point diff {report.max_fixed_point_diff:.3e} "
               f"[{'ok' if report.fixed_point_ok else 'FAIL'}]")
    click.echo(f"covariance dominance: {report.instance_count} instances, "
               f"min gap eigenvalue {report.min_gap_eigenvalue:.3e} "
               f"[{'ok' if report.dominance_ok else 'FAIL'}]")
    if not report.passed:
        raise click.ClickException("theory verification failed")


@main.command()
def gradcheck():
    """Compare analytic gradients against central finite differences."""
    results = gradient_battery()
    for r in results:
        click.echo(f"{r.name}: {r.instances} instances, "
                   f"max relative error {r.max_error:.3e} "
                   f"(tolerance {r.tolerance:.0e}) "
                   f"[{'ok' if r.passed else 'FAIL'}]")
    if not all(r.passed for r in results):
        raise click.ClickException("gradient check failed")


if __name__ == "__main__":
    main()
