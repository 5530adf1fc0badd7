"""Command line interface: ``hopfcont run|plot|floquet|tint|inspect|demos``.

Run directories are created below ``$HOPFCONT_OUTPUT_ROOT`` (default: the
current directory).  Point and branch paths given to the other commands
are looked up as given first, then below the output root.
"""

from __future__ import annotations

import csv
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .. import floquet as floq
from .. import timeint
from ..demos import DEMOS
from .config import ConfigError, load_config
from .plots import bifurcation_diagram, multiplier_plot, spacetime
from .runner import output_root, run_config
from .snapshot import SnapshotError, load_point, read_raw


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    alt = output_root() / p
    if alt.exists():
        return alt
    raise click.ClickException(f"{path} not found (also looked in {output_root()})")


def _load_orbit(path: str):
    try:
        snap = load_point(_resolve(path))
    except SnapshotError as exc:
        raise click.ClickException(str(exc)) from None
    if snap.kind != "orbit":
        raise click.ClickException(f"{path} is a steady point; this command needs a periodic orbit")
    return snap


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose):
    """Continuation of steady states and periodic orbits of 1D PDE demos."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-root", type=click.Path(file_okay=False), default=None,
              help="overrides $HOPFCONT_OUTPUT_ROOT")
def run(config, output_root):
    """Execute the stages of a JSON run configuration."""
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from None
    result = run_config(cfg, None if output_root is None else Path(output_root))
    for line in result.log:
        click.echo(line)
    click.echo(f"outputs in {result.root}")
    sys.exit(result.status)


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--kind", type=click.Choice(["bd", "spacetime", "multipliers"]), default="bd")
@click.option("--quantity", default="norm", show_default=True, help="bd: y-axis column (norm, T, max_u1, ...)")
@click.option("--component", default=1, show_default=True, help="spacetime: component number (1-based)")
@click.option("--alg", type=click.Choice(["fa1", "fa2"]), default="fa1", help="multipliers: algorithm")
@click.option("--out", default=None, help="output file (bd) or stem (spacetime, multipliers)")
def plot(paths, kind, quantity, component, alg, out):
    """Write SVG (and CSV) plots from branch directories or point files."""
    if kind == "bd":
        dirs = [_resolve(p) for p in paths]
        target = Path(out) if out else dirs[0] / f"bd_{quantity}.svg"
        try:
            click.echo(bifurcation_diagram(dirs, target, quantity))
        except (FileNotFoundError, KeyError) as exc:
            raise click.ClickException(f"cannot plot: {exc}") from None
        return
    for p in paths:
        snap = _load_orbit(p)
        src = _resolve(p)
        if kind == "spacetime":
            stem = Path(out) if out else src.parent / f"{src.name}_spacetime_u{component}"
            for f in spacetime(snap.point, stem, component - 1):
                click.echo(f)
        else:
            fr = floq.floquet(snap.point, alg=2 if alg == "fa2" else 1)
            stem = Path(out) if out else src.parent / f"{src.name}_floquet_{alg}"
            for f in multiplier_plot(fr.multipliers, stem):
                click.echo(f)


@main.command()
@click.argument("point")
@click.option("--alg", type=click.Choice(["fa1", "fa2"]), default="fa1", show_default=True)
@click.option("--count", default=10, show_default=True, help="number of multipliers printed")
def floquet(point, alg, count):
    """Floquet multipliers of a stored orbit."""
    snap = _load_orbit(point)
    fr = floq.floquet(snap.point, alg=2 if alg == "fa2" else 1, nfloq=max(count, 20))
    click.echo(f"ind={fr.ind} err={fr.err:.3e}")
    for g in fr.multipliers[:count]:
        click.echo(f"{g.real: .10e} {g.imag: .10e}  |g|={abs(g):.6e}")


@main.command()
@click.argument("point")
@click.option("--periods", default=4.0, show_default=True)
@click.option("--npp", default=None, type=int, help="steps per period (default 10 m)")
@click.option("--out", default=None, help="CSV path for (t, error)")
def tint(point, periods, npp, out):
    """Integrate in time from the first slice of a stored orbit."""
    snap = _load_orbit(point)
    try:
        ts = timeint.hotintxs(snap.problem, snap.point, npp=npp, nperiods=periods)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    src = _resolve(point)
    target = Path(out) if out else src.parent / f"{src.name}_tint.csv"
    with target.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "error"])
        for t, e in zip(ts.times, ts.errors):
            w.writerow([repr(float(t)), repr(float(e))])
    click.echo(f"max error {np.max(ts.errors):.4e}, final error {ts.errors[-1]:.4e}; wrote {target}")
    if not ts.completed:
        raise click.ClickException(ts.message)


@main.command()
@click.argument("point")
def inspect(point):
    """Print the header of a point file."""
    try:
        header, arrays = read_raw(_resolve(point))
    except SnapshotError as exc:
        raise click.ClickException(str(exc)) from None
    rec = header["recipe"]
    click.echo(f"kind: {header['kind']}")
    click.echo(f"demo: {rec['demo']} {rec['options']}  bc={rec['bc']} n_u={rec['nu']}")
    click.echo(f"primary parameter index: {rec['ilam']}, aux: {rec['aux']}, hopf aux: {rec['hopf_aux']}")
    click.echo("parameters: " + " ".join(f"{v:.6g}" for v in arrays["par"]))
    if header["kind"] == "orbit":
        o = header["orbit"]
        click.echo(f"T={o['T']:.10g} lam={o['lam']:.10g} m={o['m']} type={o['ptype']}")
        if "record" in header:
            r = header["record"]
            click.echo(f"step={r['step']} ind={r['ind']} err={r['err']}")
    else:
        p = header["point"]
        click.echo(f"step={p['step']} lam={p['lam']:.10g} type={p['ptype']} counts={p['counts'].get('tuple', p['counts']) if isinstance(p['counts'], dict) else p['counts']}")
    click.echo("arrays: " + ", ".join(f"{s['name']}{tuple(s['shape'])}" for s in header["arrays"]))


@main.command()
def demos():
    """List the registered demos."""
    for name, spec in sorted(DEMOS.items()):
        click.echo(f"{name:12s} {spec.description}  params: {', '.join(spec.param_names)}")


if __name__ == "__main__":
    main()
