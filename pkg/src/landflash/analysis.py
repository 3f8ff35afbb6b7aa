"""Ensemble post-processing: Landau surfaces, flashpoints, gray areas, ternary maps."""

from __future__ import annotations

import cmath
import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import LandUseGrid, PrioritySet, SuitabilityField
from .sampler import AnnealSchedule, ReplicateSet, SampleRecord, run_replicates

SQRT3 = math.sqrt(3.0)
# z-map roots: type s sits at angle 2*pi*(s-1)/3
Z_ROOTS = np.exp(2j * np.pi * (np.arange(3) - 1) / 3)


class FlashpointWarning(UserWarning):
    pass


# --- histograms and Landau surfaces -------------------------------------------

@dataclass
class UseCountHistogram:
    """Sample counts per use-count bin.

    ``axis`` is a type index (1-D over N_X), ``None`` (full count vector) or
    ``"pooled"`` (1-D over N_X with every type contributing an entry).
    """

    bins: dict
    total: int
    n_cells: int
    axis: int | str | None = None
    bin_width: int = 1

    def merge(self, other: "UseCountHistogram") -> "UseCountHistogram":
        if (self.axis, self.n_cells, self.bin_width) != (other.axis, other.n_cells, other.bin_width):
            raise ValueError("cannot merge histograms over different axes or map sizes")
        bins = Counter(self.bins)
        bins.update(other.bins)
        return UseCountHistogram(dict(bins), self.total + other.total, self.n_cells, self.axis,
                                 self.bin_width)


def _count_vectors(records) -> np.ndarray:
    rows = [r.use_counts if isinstance(r, SampleRecord) else tuple(r) for r in records]
    if not rows:
        raise ValueError("cannot build a histogram from zero records")
    arr = np.asarray(rows, dtype=np.int64)
    sums = arr.sum(axis=1)
    if np.any(sums != sums[0]):
        raise ValueError("records have inconsistent map sizes")
    return arr


def _bin(values: np.ndarray, width: int) -> np.ndarray:
    return (values // width) * width


def build_histogram(records, axis: int | str | None = None, bin_width: int = 1) -> UseCountHistogram:
    """Histogram of use counts over records (SampleRecords or count vectors)."""
    arr = _count_vectors(records)
    n_cells = int(arr[0].sum())
    if axis is None:
        keys = map(tuple, _bin(arr, bin_width).tolist())
        bins = Counter(keys)
        total = len(arr)
    elif axis == "pooled":
        bins = Counter(_bin(arr, bin_width).ravel().tolist())
        total = arr.size
    else:
        bins = Counter(_bin(arr[:, axis], bin_width).tolist())
        total = len(arr)
    return UseCountHistogram(dict(bins), total, n_cells, axis, bin_width)


def marginal(hist: UseCountHistogram, axis: int) -> UseCountHistogram:
    if hist.axis is not None:
        raise ValueError("marginalise only full count-vector histograms")
    bins: Counter = Counter()
    for key, n in hist.bins.items():
        bins[key[axis]] += n
    return UseCountHistogram(dict(bins), hist.total, hist.n_cells, axis, hist.bin_width)


@dataclass
class LandauSurface:
    bins: list
    F: np.ndarray
    counts: np.ndarray
    offset: float
    axis: int | str | None = None
    bin_width: int = 1
    total: int = 0

    def as_dict(self) -> dict:
        return {b: float(f) for b, f in zip(self.bins, self.F)}


def landau_surface(hist: UseCountHistogram) -> LandauSurface:
    """F(bin) = -ln(count/total), shifted so the lowest observed bin has F = 0."""
    if hist.total <= 0 or not hist.bins:
        raise ValueError("histogram is empty")
    keys = sorted(hist.bins)
    counts = np.array([hist.bins[k] for k in keys], dtype=np.int64)
    raw = -np.log(counts / hist.total)
    offset = float(raw.min())
    return LandauSurface(keys, raw - offset, counts, offset, hist.axis, hist.bin_width, hist.total)


def dense_profile(surface: LandauSurface) -> tuple[list, np.ndarray]:
    """1-D surface on a gap-free bin grid.

    Unobserved bins get the free energy of half a sample, above every observed
    bin, so empty stretches separate wells instead of being skipped over.
    Tuple-keyed surfaces are returned unchanged.
    """
    if not surface.bins or isinstance(surface.bins[0], tuple):
        return list(surface.bins), np.asarray(surface.F, dtype=float)
    w = surface.bin_width
    lo, hi = surface.bins[0], surface.bins[-1]
    grid = list(range(lo, hi + w, w))
    total = surface.total or int(np.sum(surface.counts))
    ceiling = math.log(2 * total) - surface.offset
    f = np.full(len(grid), ceiling)
    for b, v in zip(surface.bins, surface.F):
        f[(b - lo) // w] = v
    return grid, f


@dataclass(frozen=True)
class Minimum:
    bin: object
    F: float
    depth: float


def smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average; the window shrinks at the ends."""
    if window <= 1 or len(values) < 2:
        return np.asarray(values, dtype=float).copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(len(values))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + (window - half), len(values))
    return (csum[hi] - csum[lo]) / (hi - lo)


def _local_minima(f: np.ndarray) -> list[int]:
    # plateau-aware: a run of equal values is a minimum if both sides rise
    out = []
    n = len(f)
    k = 0
    while k < n:
        end = k
        while end + 1 < n and f[end + 1] == f[k]:
            end += 1
        left_ok = k == 0 or f[k - 1] > f[k]
        right_ok = end == n - 1 or f[end + 1] > f[k]
        if left_ok and right_ok:
            out.append(k)
        k = end + 1
    return out


def _depth(f: np.ndarray, k: int) -> float:
    """Barrier from index k to the nearest strictly lower point (inf if none)."""
    best = math.inf
    for step in (-1, 1):
        top = f[k]
        x = k + step
        while 0 <= x < len(f):
            if f[x] < f[k]:
                best = min(best, top - f[k])
                break
            top = max(top, f[x])
            x += step
    return best


def find_minima(surface: LandauSurface, smoothing_window: int = 3,
                min_depth: float = 0.0) -> list[Minimum]:
    """Local minima of the smoothed surface, lowest F first (ties: lower bin).

    Minima shallower than ``min_depth`` relative to their lowest escape
    barrier are dropped; the global minimum always survives.
    """
    if len(surface.bins) == 0:
        raise ValueError("surface is empty")
    bins, f = dense_profile(surface)
    f = smooth(f, smoothing_window)
    found = [Minimum(bins[k], float(f[k]), _depth(f, k)) for k in _local_minima(f)]
    found = [m for m in found if m.depth >= min_depth]
    return sorted(found, key=lambda m: (m.F, m.bin))


# --- optimal counts -------------------------------------------------------------

@dataclass
class OptimalCounts:
    counts: tuple
    minima: list
    patterns: list
    degenerate: bool
    smoothing_window: int = 3


def _basin_edges(surface: LandauSurface, minima: list[Minimum], window: int) -> list[float]:
    """Bin positions of the highest point between consecutive minima."""
    bins, f = dense_profile(surface)
    f = smooth(f, window)
    pos = sorted(bins.index(m.bin) for m in minima)
    edges = []
    for a, b in zip(pos, pos[1:]):
        k = a + int(np.argmax(f[a:b + 1]))
        edges.append(bins[k])
    return edges


def optimal_counts(ensemble, smoothing_window: int = 3, bin_width: int = 1,
                   min_depth: float = 0.5, degeneracy_tol: float = 0.5) -> OptimalCounts:
    """Per-type global Landau minima plus the set of near-degenerate optimal patterns.

    Each sample is assigned to a basin of every per-type surface; samples
    sharing all basins form a pattern. Patterns whose free energy lies within
    ``degeneracy_tol`` of the best are reported; more than one flags degeneracy.
    """
    records = ensemble.all_records() if isinstance(ensemble, ReplicateSet) else list(ensemble)
    if not records:
        raise ValueError("ensemble has no records")
    arr = _count_vectors(records)
    n_types = arr.shape[1]
    counts, per_type, basin_ids = [], [], []
    for x in range(n_types):
        surf = landau_surface(build_histogram(arr, axis=x, bin_width=bin_width))
        mins = find_minima(surf, smoothing_window, min_depth)
        counts.append(int(mins[0].bin))
        per_type.append(mins)
        edges = _basin_edges(surf, mins, smoothing_window)
        basin_ids.append(np.searchsorted(np.asarray(edges), _bin(arr[:, x], bin_width), side="right"))
    groups = Counter(zip(*(b.tolist() for b in basin_ids)))
    total = len(arr)
    best_f = -math.log(max(groups.values()) / total)
    patterns = []
    for key, n in sorted(groups.items(), key=lambda kv: (-kv[1], kv[0])):
        f = -math.log(n / total) - best_f
        if f > degeneracy_tol:
            continue
        mask = np.all(np.stack(basin_ids, axis=1) == np.array(key), axis=1)
        rep = []
        for x in range(n_types):
            surf = landau_surface(build_histogram(arr[mask], axis=x, bin_width=bin_width))
            rep.append(int(find_minima(surf, smoothing_window)[0].bin))
        patterns.append((tuple(rep), f))
    return OptimalCounts(tuple(counts), per_type, patterns, len(patterns) > 1, smoothing_window)


# --- flashpoints ----------------------------------------------------------------

@dataclass
class UseCountSeries:
    priorities: list
    counts: np.ndarray
    replicates: list = field(default_factory=list)
    n_cells: int | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        p = list(self.priorities)
        if len(p) != len(self.counts):
            raise ValueError("one count vector per priority is required")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("priorities must be strictly increasing")
        if np.any(self.counts < 0) or (self.n_cells is not None and np.any(self.counts > self.n_cells)):
            raise ValueError("use counts out of range")


@dataclass(frozen=True)
class Flashpoint:
    n: int
    p_low: float
    p_high: float
    types: tuple
    changes: tuple


def relative_change(a: float, b: float) -> float:
    return abs(b - a) / (0.5 * (a + b))


def detect_flashpoints(series: UseCountSeries, alpha: float = 0.1) -> list[Flashpoint]:
    """Intervals where some type's symmetric relative change exceeds ``alpha``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(series.priorities) < 2:
        raise ValueError("need at least two priority points")
    out, skipped = [], []
    c = series.counts
    for n in range(len(series.priorities) - 1):
        types, changes = [], []
        for x in range(c.shape[1]):
            a, b = c[n, x], c[n + 1, x]
            if a + b == 0:
                skipped.append((n, x))
                continue
            r = relative_change(a, b)
            if r > alpha:
                types.append(x)
                changes.append(r)
        if types:
            out.append(Flashpoint(n, series.priorities[n], series.priorities[n + 1],
                                  tuple(types), tuple(changes)))
    if skipped:
        shown = ", ".join(f"interval {n} type {x}" for n, x in skipped[:5])
        more = f" and {len(skipped) - 5} more" if len(skipped) > 5 else ""
        warnings.warn(f"types absent on both sides were skipped: {shown}{more}",
                      FlashpointWarning, stacklevel=2)
    return out


def write_flashpoints_csv(flashpoints: Sequence[Flashpoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "P_low", "P_high", "type", "rel_change"])
        for fp in flashpoints:
            for x, r in zip(fp.types, fp.changes):
                w.writerow([fp.n, repr(float(fp.p_low)), repr(float(fp.p_high)), x, repr(float(r))])


# --- gray areas -----------------------------------------------------------------

@dataclass
class GrayAreaMap:
    mean: np.ndarray
    n_samples: int

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.mean)

    @property
    def argument(self) -> np.ndarray:
        return np.angle(self.mean)


def _as_cells(g) -> np.ndarray:
    return g.cells if isinstance(g, LandUseGrid) else np.asarray(g)


def gray_area_map(ensemble_a, ensemble_b=None, n_types: int = 3) -> GrayAreaMap:
    """Per-parcel mean of exp(2 pi i (s-1)/3) over the pooled ensembles."""
    if n_types != 3:
        raise ValueError("the z-map is defined for exactly three land-use types")
    grids = [_as_cells(g) for g in ensemble_a]
    if ensemble_b is not None:
        grids += [_as_cells(g) for g in ensemble_b]
    if not grids:
        raise ValueError("gray-area map needs at least one grid")
    shape = grids[0].shape
    if any(g.shape != shape for g in grids):
        raise ValueError("all grids must share one shape")
    stack = np.stack(grids).astype(np.int64)
    if stack.min() < 0 or stack.max() > 2:
        raise ValueError("type codes must be 0, 1 or 2")
    freq = np.stack([(stack == s).sum(axis=0) for s in range(3)], axis=-1) / len(grids)
    return GrayAreaMap(freq @ Z_ROOTS, len(grids))


def write_gray_area_csv(gmap: GrayAreaMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "re", "im", "modulus", "argument"])
        n, m = gmap.mean.shape
        for i in range(n):
            for j in range(m):
                z = complex(gmap.mean[i, j])
                w.writerow([i, j, repr(z.real), repr(z.imag), repr(abs(z)), repr(cmath.phase(z))])


def read_gray_area_csv(path) -> GrayAreaMap:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = max(int(r["i"]) for r in rows) + 1
    m = max(int(r["j"]) for r in rows) + 1
    mean = np.zeros((n, m), dtype=complex)
    for r in rows:
        mean[int(r["i"]), int(r["j"])] = complex(float(r["re"]), float(r["im"]))
    return GrayAreaMap(mean, 0)


# --- ternary projection ---------------------------------------------------------

@dataclass(frozen=True)
class TernaryPoint:
    weights: tuple
    x: float
    y: float


def ternary_project(counts, n_cells: int | None = None) -> TernaryPoint:
    """Vertices: type 0 at (0, 0), type 1 at (1, 0), type 2 at (1/2, sqrt(3)/2)."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (3,):
        raise ValueError("ternary projection needs exactly three use counts")
    if np.any(counts < 0):
        raise ValueError("use counts must be non-negative")
    total = counts.sum()
    if n_cells is not None and total != n_cells:
        raise ValueError(f"counts sum to {total:g}, map has {n_cells} parcels")
    if total <= 0:
        raise ValueError("counts sum to zero")
    w = counts / total
    return TernaryPoint(tuple(w.tolist()), float(w[1] + w[2] / 2), float(w[2] * SQRT3 / 2))


def ternary_unproject(x: float, y: float) -> tuple[float, float, float]:
    w2 = 2.0 * y / SQRT3
    w1 = x - w2 / 2.0
    return (1.0 - w1 - w2, w1, w2)


def write_ternary_csv(points: Sequence[TernaryPoint], path, sample_ids=None) -> None:
    ids = range(len(points)) if sample_ids is None else sample_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "x", "y", "w0", "w1", "w2"])
        for k, p in zip(ids, points):
            w.writerow([k, repr(p.x), repr(p.y), *(repr(float(v)) for v in p.weights)])


def write_landau_csv(surface: LandauSurface, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "F", "count"])
        for b, f, c in zip(surface.bins, surface.F, surface.counts):
            key = "|".join(map(str, b)) if isinstance(b, tuple) else b
            w.writerow([key, repr(float(f)), int(c)])


# --- symmetry breaking ------------------------------------------------------------

@dataclass
class ScanPoint:
    t: float
    minima: list
    surface: LandauSurface

    @property
    def broken(self) -> bool:
        return len(self.minima) >= 2


@dataclass
class SymmetryScan:
    points: list
    settings: dict

    @property
    def broken_ts(self) -> list:
        return [p.t for p in self.points if p.broken]

    @property
    def critical_t(self) -> float | None:
        """Largest T whose surface still shows several well-separated minima."""
        ts = self.broken_ts
        return max(ts) if ts else None

    @property
    def bracket(self) -> tuple | None:
        """(largest broken T, smallest unbroken T above it), when both exist."""
        tc = self.critical_t
        if tc is None:
            return None
        above = [p.t for p in self.points if p.t > tc and not p.broken]
        return (tc, min(above)) if above else None

    @property
    def monotone(self) -> bool:
        flags = [p.broken for p in sorted(self.points, key=lambda p: p.t)]
        return flags == sorted(flags, reverse=True)


def symmetry_breaking_scan(t_values, seeds, schedule: AnnealSchedule | None = None,
                           shape=(30, 30), n_types: int = 3, compactness: float = 1.0,
                           sampler: str = "wolff", bin_width: int | None = None,
                           smoothing_window: int = 3, min_depth: float = 0.3,
                           master_seed: int = 0, parallelism: int = 1) -> SymmetryScan:
    """Compactness-only runs held at each T; Landau minima of the pooled N_X surface.

    ``schedule`` supplies sweep counts; its target temperature is replaced by
    each T and the start temperature is never below T.
    """
    t_values = [float(t) for t in t_values]
    if t_values != sorted(t_values):
        raise ValueError("t_values must be sorted")
    if schedule is None:
        schedule = AnnealSchedule(15.0, 1.0, 100, 1000, 1000, 2000, 20)
    n_cells = shape[0] * shape[1]
    if bin_width is None:
        bin_width = max(1, n_cells // 30)
    field = SuitabilityField.zeros(*shape, n_types)
    points = []
    for t in t_values:
        sched = AnnealSchedule(max(schedule.t_start, t), t, schedule.thermalize_sweeps,
                               schedule.cool_sweeps, schedule.equilibrate_sweeps,
                               schedule.measure_sweeps, schedule.measure_interval)
        reps = run_replicates(field, PrioritySet(compactness, 0.0, t), sched, seeds, sampler,
                              parallelism, master_seed=master_seed)
        surf = landau_surface(build_histogram(reps.all_records(), "pooled", bin_width))
        points.append(ScanPoint(t, find_minima(surf, smoothing_window, min_depth), surf))
    settings = dict(shape=list(shape), n_types=n_types, compactness=compactness, sampler=sampler,
                    bin_width=bin_width, smoothing_window=smoothing_window, min_depth=min_depth,
                    n_seeds=len(list(seeds)), schedule=schedule.as_dict())
    return SymmetryScan(points, settings)
