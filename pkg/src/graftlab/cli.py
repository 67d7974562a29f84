"""Command-line entry point: ``graftlab sweep`` and ``graftlab audit ...``."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import lab


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        click.echo(text, nl=False)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    click.echo(f"wrote {out / name}", err=True)


@click.group()
def main():
    """Grafting experiments and bound audits."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("sweep-out"), show_default=True)
@click.option("--threads", type=click.IntRange(1), default=1, show_default=True)
def sweep(config_path, out, threads):
    """Graft along the configured t-grid and tabulate lengths, twists and limits."""
    try:
        cfg = lab.SweepConfig.load(config_path)
    except lab.ConfigError as exc:
        raise click.ClickException(f"config error: {exc}") from None
    result = lab.graft_sweep(cfg, threads=threads)
    for p in lab.write_sweep_outputs(result, out):
        click.echo(f"wrote {p}", err=True)
    failed = any(r["status"] != "ok" for r in result.rows)
    sys.exit(1 if failed else 0)


@main.group()
def audit():
    """Check computed quantities against the proved bounds; exit status 1 on any failure."""


def _finish(result: lab.AuditResult, out, name):
    _emit(result.csv(), out, name)
    click.echo(f"{len(result.rows) - result.failures}/{len(result.rows)} passed", err=True)
    sys.exit(0 if result.passed else 1)


_out = click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="directory for the CSV (default: stdout)")
_threads = click.option("--threads", type=click.IntRange(1), default=1, show_default=True)
_seed = click.option("--seed", type=int, default=0, show_default=True)


@audit.command()
@click.option("--count", type=click.IntRange(1), default=1000, show_default=True)
@_seed
@_out
@_threads
def collar(count, seed, out, threads):
    """Exact collar modulus against the two-sided bound for random lengths."""
    _finish(lab.collar_audit(count, seed), out, "collar.csv")


@audit.command()
@click.option("--count", type=click.IntRange(1), default=50, show_default=True)
@click.option("--n", "n", type=click.IntRange(8), default=128, show_default=True, help="lattice columns (h = 1/n)")
@click.option("--refine/--no-refine", default=False, help="repeat every region at h/2")
@_seed
@_out
@_threads
def nonsqueeze(count, n, refine, seed, out, threads):
    """Largest straight subcylinder of random notched cylinders against modulus - 1."""
    if n % 64:
        raise click.BadParameter("must be a multiple of 64", param_hint="--n")
    _finish(lab.nonsqueeze_audit(count, seed, n, refine, threads), out, "nonsqueeze.csv")


@audit.command()
@click.option("--maps", "count", type=click.IntRange(1), default=100, show_default=True)
@click.option("--b", "b_range", type=float, nargs=2, default=(4.0, 8.0), show_default=True, help="range of strip half-heights")
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.option("--c", "c", type=float, default=None, help="buffer (default: buffer_for_epsilon(eps))")
@_seed
@_out
@_threads
def distortion(count, b_range, eps, c, seed, out, threads):
    """Certified random strip maps against the displacement bound."""
    if not 3 < b_range[0] <= b_range[1]:
        raise click.BadParameter("need 3 < bmin <= bmax", param_hint="--b")
    if c is not None and c < 3:
        raise click.BadParameter("must be at least 3", param_hint="--c")
    _finish(lab.distortion_audit(count, seed, eps, b_range, c, threads), out, "distortion.csv")


@audit.command()
@click.option("--b", "bs", type=float, multiple=True, help="Teichmüller ring parameters (default 1, 2, 4)")
@click.option("--n", "n", type=click.IntRange(8), default=128, show_default=True)
@click.option("--region", "regions", type=click.Path(exists=True, dir_okay=False), multiple=True, help="region mask file")
@_seed
@_out
@_threads
def modulus(bs, n, regions, seed, out, threads):
    """Lattice modulus and largest straight subcylinder, checked on Teichmüller rings."""
    if not bs and not regions:
        bs = (1.0, 2.0, 4.0)
    try:
        result = lab.modulus_audit(bs, n, regions=regions, threads=threads)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    _finish(result, out, "modulus.csv")


if __name__ == "__main__":
    main()
