"""Priority sweep: replicates per P_S, optimal counts, flashpoints, gray areas.

Layout of a run directory::

    effective_config.json
    suitability.csv
    points/ps_<k>/samples.csv          one per priority point (resume unit)
    points/ps_<k>/landau_<X>.csv
    points/ps_<k>/ternary.csv          S = 3 only
    use_count_series.csv
    flashpoints.csv
    stable_intervals.csv
    grayarea/fp<n>_{below,above,combined}.csv
    manifest.json
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis as A
from .config import SCHEMA_VERSION, RunConfig, write_effective_config
from .lattice import write_suitability_csv
from .sampler import ReplicateSet, SampleRecord, read_samples_csv, run_replicates, write_samples_csv

log = logging.getLogger(__name__)

OUT_ENV = "LANDFLASH_OUT"


def resolve_output_dir(cfg: RunConfig, out: str | None = None) -> Path:
    return Path(out or os.environ.get(OUT_ENV) or cfg.output_dir)


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def point_dir(out: Path, p_s: float) -> Path:
    # keyed by value so refinement points slot in without renumbering
    return out / "points" / f"ps_{p_s:.6f}"


@dataclass
class PointResult:
    p_s: float
    optimal: A.OptimalCounts
    n_replicates: int


def _optimal(records, cfg: RunConfig) -> A.OptimalCounts:
    a = cfg.analysis
    return A.optimal_counts(records, a.smoothing_window, a.bin_width, a.min_depth, a.degeneracy_tol)


def run_point(cfg: RunConfig, field, p_s: float, out: Path, seeds, parallelism: int,
              resume: bool) -> PointResult:
    d = point_dir(out, p_s)
    samples = d / "samples.csv"
    if resume and samples.exists():
        by_seed = read_samples_csv(samples)
        records = [r for s in sorted(by_seed, key=list(seeds).index) for r in by_seed[s]] \
            if set(by_seed) == set(seeds) else None
        if records is not None:
            log.info("P_S=%g: reusing %s", p_s, samples)
            return PointResult(p_s, _optimal(records, cfg), len(seeds))
    d.mkdir(parents=True, exist_ok=True)
    reps = run_replicates(field, cfg.priorities(p_s), cfg.schedule, seeds, cfg.sampler, parallelism,
                          master_seed=cfg.master_seed, interleave=cfg.interleave, periodic=cfg.periodic)
    records = reps.all_records()
    opt = _optimal(records, cfg)
    for x in range(cfg.n_types):
        surf = A.landau_surface(A.build_histogram(records, x, cfg.analysis.bin_width))
        A.write_landau_csv(surf, d / f"landau_{x}.csv")
    if cfg.n_types == 3:
        pts = [A.ternary_project(r.use_counts) for r in records]
        A.write_ternary_csv(pts, d / "ternary.csv")
    # samples.csv last: its presence marks the point complete
    _atomic_write(samples, lambda p: write_samples_csv(reps, p))
    return PointResult(p_s, opt, len(seeds))


def write_series_csv(results: list[PointResult], n_types: int, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["P_S", *(f"N_{x}" for x in range(n_types)), *(f"frac_{x}" for x in range(n_types)),
                    "replicates", "degenerate"])
        for r in results:
            c = r.optimal.counts
            total = sum(p for p in c) or 1
            w.writerow([repr(r.p_s), *c, *(repr(v / total) for v in c), r.n_replicates,
                        int(r.optimal.degenerate)])


def read_series_csv(path) -> A.UseCountSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty series")
    n_types = sum(1 for k in rows[0] if k.startswith("N_"))
    ps = [float(r["P_S"]) for r in rows]
    counts = [[float(r[f"N_{x}"]) for x in range(n_types)] for r in rows]
    reps = [int(r.get("replicates", 0) or 0) for r in rows]
    return A.UseCountSeries(ps, counts, reps)


def write_stable_intervals(results: list[PointResult], flashpoints, n_types: int, path: Path) -> None:
    """Representative counts for each run of priorities between flashpoints."""
    cuts = sorted(fp.n for fp in flashpoints)
    groups, start = [], 0
    for c in cuts:
        groups.append(results[start:c + 1])
        start = c + 1
    groups.append(results[start:])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["P_low", "P_high", *(f"N_{x}" for x in range(n_types))])
        for g in groups:
            if not g:
                continue
            rep = g[len(g) // 2].optimal.counts
            w.writerow([repr(g[0].p_s), repr(g[-1].p_s), *rep])


def _basin_snapshots(cfg: RunConfig, field, p_s: float, seeds, parallelism: int) -> list[np.ndarray]:
    """Grids sampled at ``p_s`` whose counts sit in the optimal pattern's basins.

    Replicates are deterministic, so rerunning with snapshots reproduces the
    recorded samples exactly.
    """
    reps = run_replicates(field, cfg.priorities(p_s), cfg.schedule, seeds, cfg.sampler, parallelism,
                          master_seed=cfg.master_seed, interleave=cfg.interleave, snapshots=True,
                          periodic=cfg.periodic)
    records = reps.all_records()
    target = _optimal(records, cfg).counts
    arr = np.array([r.use_counts for r in records])
    # nearest samples to the optimal counts, by L1 distance; ties all kept
    dist = np.abs(arr - np.array(target)).sum(axis=1)
    keep = dist <= np.quantile(dist, 0.5)
    return [r.snapshot for r, k in zip(records, keep) if k]


def sweep_pipeline(cfg: RunConfig, out: str | Path | None = None, parallelism: int | None = None,
                   resume: bool = False, base_dir: Path | None = None) -> Path:
    out = resolve_output_dir(cfg, str(out) if out is not None else None)
    out.mkdir(parents=True, exist_ok=True)
    par = parallelism or cfg.parallelism
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    try:
        write_effective_config(cfg, out / "effective_config.json")
        field = cfg.build_field(base_dir)
        write_suitability_csv(field, out / "suitability.csv")
        seeds = list(cfg.seeds)
        points = list(cfg.suitability_priorities)
        results = [run_point(cfg, field, p, out, seeds, par, resume) for p in points]

        a = cfg.analysis
        for _ in range(a.refine_depth if len(results) > 1 else 0):
            series = A.UseCountSeries([r.p_s for r in results], [r.optimal.counts for r in results])
            fps = A.detect_flashpoints(series, a.alpha)
            if not fps:
                break
            extra_seeds = list(range(max(seeds) + 1, max(seeds) + 1 + len(seeds) * (a.refine_multiplier - 1)))
            more = []
            for fp in fps:
                mid = round(0.5 * (fp.p_low + fp.p_high), 10)
                more.append(run_point(cfg, field, mid, out, seeds + extra_seeds, par, resume))
            results = sorted(results + more, key=lambda r: r.p_s)

        series = A.UseCountSeries([r.p_s for r in results], [r.optimal.counts for r in results],
                                  [r.n_replicates for r in results])
        write_series_csv(results, cfg.n_types, out / "use_count_series.csv")
        fps = A.detect_flashpoints(series, a.alpha) if len(results) > 1 else []
        A.write_flashpoints_csv(fps, out / "flashpoints.csv")
        write_stable_intervals(results, fps, cfg.n_types, out / "stable_intervals.csv")

        if cfg.n_types == 3 and cfg.snapshots == "flashpoints" and fps:
            gdir = out / "grayarea"
            gdir.mkdir(exist_ok=True)
            for fp in fps:
                below = _basin_snapshots(cfg, field, fp.p_low, seeds, par)
                above = _basin_snapshots(cfg, field, fp.p_high, seeds, par)
                A.write_gray_area_csv(A.gray_area_map(below), gdir / f"fp{fp.n}_below.csv")
                A.write_gray_area_csv(A.gray_area_map(above), gdir / f"fp{fp.n}_above.csv")
                A.write_gray_area_csv(A.gray_area_map(below, above), gdir / f"fp{fp.n}_combined.csv")
        write_manifest(out, "complete")
    except Exception:
        failed.write_text(traceback.format_exc())
        write_manifest(out, "failed")
        raise
    return out


def write_manifest(out: Path, status: str) -> dict:
    files = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name not in ("manifest.json",) and not p.name.endswith(".tmp"):
            files.append({"path": p.relative_to(out).as_posix(), "sha256": sha256_file(p),
                          "bytes": p.stat().st_size})
    manifest = {"schema_version": SCHEMA_VERSION, "status": status, "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def records_from_samples(path) -> list[SampleRecord]:
    by_seed = read_samples_csv(path)
    return [r for s in by_seed for r in by_seed[s]]


def single_run(cfg: RunConfig, out: str | Path | None = None, parallelism: int | None = None,
               base_dir: Path | None = None) -> ReplicateSet:
    """Replicates at the first configured priority; writes samples.csv."""
    out = resolve_output_dir(cfg, str(out) if out is not None else None)
    out.mkdir(parents=True, exist_ok=True)
    write_effective_config(cfg, out / "effective_config.json")
    field = cfg.build_field(base_dir)
    reps = run_replicates(field, cfg.priorities(cfg.suitability_priorities[0]), cfg.schedule,
                          list(cfg.seeds), cfg.sampler, parallelism or cfg.parallelism,
                          master_seed=cfg.master_seed, interleave=cfg.interleave, periodic=cfg.periodic)
    _atomic_write(out / "samples.csv", lambda p: write_samples_csv(reps, p))
    write_manifest(out, "complete")
    return reps
