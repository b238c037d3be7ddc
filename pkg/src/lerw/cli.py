"""Command line entry point: ``lerw <experiment> [options]``.

Exit codes: 0 success, 1 config error, 2 resource refusal, 3 runtime failure.
"""

from __future__ import annotations

import sys

import click

from lerw.config import EXPERIMENTS, ConfigError, load_config, parse_config
from lerw.harness import ResourceError, run_experiment, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_RUNTIME = 0, 1, 2, 3


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
@click.option("--config", "config_file", type=click.Path(dir_okay=False), help="JSON config file; flags override it.")
@click.option("--N", "N", type=int, help="Scaling parameter N (walk length for walk/erase).")
@click.option("--alpha", type=str, help="Window exponent: W = floor(N^alpha); 'inf' for full erasure.")
@click.option("--dim", type=int, help="Lattice dimension d (default 3).")
@click.option("--replicas", type=int, help="Replicas per stage.")
@click.option("--seed", "master_seed", type=str, help="64-bit master seed.")
@click.option("--workers", type=int, help="Worker processes; results do not depend on it.")
@click.option("--out", "out_dir", type=str, help="Output directory.")
@click.option("--n-grid", "n_grid", type=str, help="Comma-separated indices (survival grid, zeta grid).")
@click.option("--beta-grid", "beta_grid", type=str, help="Comma-separated betas for z-decay.")
@click.option("--margin", "margin_factor", type=str, help="Path margin in units of W (>= 1).")
@click.option("--path-steps", "path_steps", type=int, help="compare-lew: steps before the margin (default 32 N).")
@click.option("--zeta", type=str, help="Known zeta estimate for the Gaussian-regime warning.")
@click.option("--bootstrap", type=int, help="Bootstrap resamples for zeta (>= 100).")
@click.option("--max-total-steps", "max_total_steps", type=int, help="Refuse runs planning more walk steps.")
def cli(experiment, config_file, **flags):
    """Run one finite-memory loop-erasure experiment and write CSV + summary.json."""
    flags["experiment"] = experiment
    if config_file:
        cfg = load_config(config_file, flags)
    else:
        cfg = parse_config(None, flags)
    result = run_experiment(cfg)
    paths = write_outputs(result, cfg.out_dir)
    for w in result.manifest.warnings:
        click.echo(f"warning: {w}", err=True)
    for p in paths:
        click.echo(str(p))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="lerw", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_RUNTIME
    except ResourceError as exc:
        click.echo(f"resource refusal: {exc}", err=True)
        return EXIT_RESOURCE
    except Exception as exc:  # noqa: BLE001
        click.echo(f"runtime failure: {type(exc).__name__}: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
