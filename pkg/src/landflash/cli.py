"""``landflash`` command line."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import analysis as A
from . import nucleation as nuc
from .config import ConfigError, RunConfig, load_config
from .lattice import PrioritySet, load_suitability, read_grid_csv
from .pipeline import read_series_csv, records_from_samples, resolve_output_dir, single_run, sweep_pipeline
from .render import MissingInputs, render_reports
from .sampler import SAMPLERS


def _load(config: str | None, seed: int | None, sampler: str | None) -> tuple[RunConfig, Path | None]:
    if config is None:
        cfg, base = RunConfig(generator={"kind": "uniform-random"}, seeds=tuple(range(300))), None
    else:
        cfg, base = load_config(config), Path(config).resolve().parent
    changes = {}
    if seed is not None:
        changes["master_seed"] = seed
    if sampler is not None:
        changes["sampler"] = sampler
    return (cfg.replace(**changes) if changes else cfg), base


def _config_options(f):
    f = click.option("--sampler", type=click.Choice(SAMPLERS), default=None, help="Override the sampler.")(f)
    f = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                     help="Override the master seed.")(f)
    f = click.option("--parallelism", type=click.IntRange(min=1), default=None, help="Worker processes.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None,
                     help="Output directory (else $LANDFLASH_OUT, else the config's output_dir).")(f)
    f = click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON or TOML run configuration.")(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Potts-model land-use allocation: sampling, flashpoints and reports."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@_config_options
def anneal(config, out, parallelism, seed, sampler):
    """Replicate anneals at the first configured P_S; writes samples.csv."""
    cfg, base = _load(config, seed, sampler)
    reps = single_run(cfg, out, parallelism, base)
    click.echo(f"{len(reps.seeds)} replicates, {len(reps.all_records())} samples -> "
               f"{resolve_output_dir(cfg, out) / 'samples.csv'}")


@main.command()
@_config_options
@click.option("--resume", is_flag=True, help="Reuse completed priority points.")
def sweep(config, out, parallelism, seed, sampler, resume):
    """Full P_S sweep: series, flashpoints, gray areas, manifest."""
    cfg, base = _load(config, seed, sampler)
    run = sweep_pipeline(cfg, out, parallelism, resume, base)
    with open(run / "flashpoints.csv") as fh:
        n = len({line.split(",", 1)[0] for line in fh.readlines()[1:]})
    click.echo(f"{n} flashpoint(s); outputs in {run}")


@main.command()
@click.argument("series", type=click.Path(exists=True))
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="flashpoints CSV path.")
def flashpoints(series, alpha, out):
    """Detect flashpoints in a use_count_series.csv (or a run directory)."""
    p = Path(series)
    if p.is_dir():
        p = p / "use_count_series.csv"
    if not 0 < alpha < 1:
        raise click.BadParameter("must lie in (0, 1)", param_hint="--alpha")
    fps = A.detect_flashpoints(read_series_csv(p), alpha)
    target = Path(out) if out else p.with_name("flashpoints.csv")
    A.write_flashpoints_csv(fps, target)
    for fp in fps:
        click.echo(f"{fp.n}: ({fp.p_low:g}, {fp.p_high:g}] types {list(fp.types)}")
    click.echo(f"{len(fps)} flashpoint(s) -> {target}")


@main.command()
@click.argument("grids", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--above", "above", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Grid CSVs from the other side of a flashpoint (pooled in).")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Gray-area CSV path.")
def grayarea(grids, above, out):
    """Per-parcel mean z-map over grid CSVs (type codes 0, 1, 2)."""
    a = [read_grid_csv(g) for g in grids]
    b = [read_grid_csv(g) for g in above] or None
    gmap = A.gray_area_map(a, b)
    A.write_gray_area_csv(gmap, out)
    click.echo(f"{gmap.n_samples} grids, {int((gmap.modulus < 1 - 1e-12).sum())} gray parcels -> {out}")


@main.command()
@click.argument("samples", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Ternary CSV path.")
def ternary(samples, out):
    """Project samples.csv use counts onto the ternary triangle."""
    recs = records_from_samples(samples)
    A.write_ternary_csv([A.ternary_project(r.use_counts) for r in recs], out)
    click.echo(f"{len(recs)} points -> {out}")


@main.command()
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--suitability", type=click.Path(exists=True), required=True,
              help="Suitability CSV (i,j,s,c) or layer stem.")
@click.option("--from", "from_type", type=int, required=True)
@click.option("--to", "to_type", type=int, required=True)
@click.option("--compactness", type=float, default=1.0, show_default=True)
@click.option("--mode", type=click.Choice(nuc.MODES), default="exact", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Prediction CSV path.")
def nucleation(mask_path, suitability, from_type, to_type, compactness, mode, out):
    """Predict the P_S above which flipping a masked region lowers H."""
    mask = nuc.read_mask_csv(mask_path)
    field = load_suitability(suitability)
    try:
        pred = nuc.predict_flashpoint_priority(mask, field, from_type, to_type,
                                               PrioritySet(compactness, 0.0, 1.0), mode)
    except nuc.NoOnsiteIncentive as exc:
        raise click.ClickException(f"no finite prediction: {exc}") from None
    if out:
        nuc.write_prediction_csv([pred], out)
    click.echo(f"L={pred.boundary} A={pred.area} mode={mode} deltaEM={pred.delta_e_m:g} "
               f"m={pred.margin:g} P_S*={pred.p_s_star:.6g}")


@main.command()
@click.argument("run_dir", type=click.Path())
def render(run_dir):
    """SVG and chart-data reports from a run directory's CSVs."""
    files = render_reports(run_dir)
    click.echo(f"{len(files)} report file(s) in {Path(run_dir) / 'report'}")


def run():
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except (ConfigError, MissingInputs, ValueError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
