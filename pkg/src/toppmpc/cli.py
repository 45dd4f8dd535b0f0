"""Command-line front end.

    toppmpc [--config FILE] [--out DIR] [--set key=value ...] COMMAND [options]

Exit status: 0 success, 1 domain failure (e.g. prevention infeasible),
2 usage or configuration error.
"""
import sys

import click

from .config import ConfigError, parse_config
from .runner import run


def _global_options(f):
    f = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                     help="Override one configuration key (repeatable).")(f)
    f = click.option("--out", default=None, help="Output directory.")(f)
    f = click.option("--config", "config_path", default=None,
                     type=click.Path(exists=True, dir_okay=False),
                     help="Configuration file (key = value lines).")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@_global_options
@click.pass_context
def main(ctx, config_path, out, sets):
    """Exercise-driven MPC for long-term type-2 diabetes progression."""
    ctx.obj = {"config": config_path, "out": out, "sets": list(sets)}


def _execute(ctx, mode, local_config, local_out, local_sets, **extra):
    g = ctx.obj or {}
    path = local_config or g.get("config")
    overrides = list(g.get("sets", [])) + list(local_sets)
    out = local_out or g.get("out")
    if out:
        overrides.append(f"out={out}")
    overrides += [f"{k}={v!r}" for k, v in extra.items() if v is not None]
    overrides.append(f"mode={mode}")
    try:
        cfg = parse_config(path, overrides)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None
    res = run(cfg)
    for line in res.lines:
        click.echo(line)
    ctx.exit(res.exit_code)


@main.command()
@_global_options
@click.pass_context
def openloop(ctx, config_path, out, sets):
    """Simulate without exercise."""
    _execute(ctx, "openloop", config_path, out, sets)


@main.command()
@click.option("--ueq", type=float, default=None,
              help="Constant equivalent input (or `ueq` in the config).")
@_global_options
@click.pass_context
def feedforward(ctx, ueq, config_path, out, sets):
    """Simulate a constant exercise program."""
    _execute(ctx, "feedforward", config_path, out, sets, ueq=ueq)


@main.command()
@_global_options
@click.pass_context
def mpc(ctx, config_path, out, sets):
    """Closed-loop receding-horizon recommendations."""
    _execute(ctx, "mpc", config_path, out, sets)


@main.command()
@click.option("--resolution", type=float, default=None, help="Dose grid step (default 0.1).")
@_global_options
@click.pass_context
def dosemin(ctx, resolution, config_path, out, sets):
    """Smallest constant input that prevents progression."""
    _execute(ctx, "dosemin", config_path, out, sets, resolution=resolution)


@main.command()
@click.option("--runs", type=int, default=None, help="Number of runs (default 100).")
@click.option("--phi", type=float, default=None, help="Relative perturbation bound.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--workers", type=int, default=None, help="Worker processes.")
@_global_options
@click.pass_context
def montecarlo(ctx, runs, phi, seed, workers, config_path, out, sets):
    """Perturbed closed-loop robustness campaign."""
    _execute(ctx, "montecarlo", config_path, out, sets, runs=runs, phi=phi, seed=seed,
             workers=workers)


@main.command()
@click.option("--ueq", type=float, default=None,
              help="Equivalent input to translate (or `ueq` in the config).")
@_global_options
@click.pass_context
def dosemap(ctx, ueq, config_path, out, sets):
    """Table of session durations delivering a given equivalent input."""
    _execute(ctx, "dosemap", config_path, out, sets, ueq=ueq)


if __name__ == "__main__":
    sys.exit(main())
