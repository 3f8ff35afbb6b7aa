"""Land-use grids, suitability fields, priorities and the MOLA objectives.

A grid stores one integer type code per parcel. The compactness objective
counts same-type Moore neighbours from every parcel, so each matching
unordered pair contributes -2. The suitability objective sums the score of
the assigned type at each parcel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = {0: "agriculture", 1: "construction", 2: "conservation"}

# half of the Moore stencil; the other half is covered by symmetry
_HALF_STENCIL = ((0, 1), (1, -1), (1, 0), (1, 1))


class DimensionMismatch(ValueError):
    """Grid and suitability field do not describe the same map."""


@dataclass
class LandUseGrid:
    """N x M parcels, each holding one of ``n_types`` use codes."""

    cells: np.ndarray
    n_types: int = 3
    periodic: bool = False

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if self.cells.ndim != 2 or min(self.cells.shape) < 1:
            raise ValueError(f"grid must be a non-empty 2-D array, got shape {self.cells.shape}")
        if self.n_types < 2:
            raise ValueError("a grid needs at least two land-use types")
        if self.cells.min() < 0 or self.cells.max() >= self.n_types:
            raise ValueError(f"type codes must lie in [0, {self.n_types})")
        if self.periodic and min(self.cells.shape) < 3:
            raise ValueError("periodic boundaries need at least 3 rows and columns")

    @classmethod
    def uniform(cls, rows: int, cols: int, code: int = 0, n_types: int = 3, periodic: bool = False):
        return cls(np.full((rows, cols), code, dtype=np.int64), n_types, periodic)

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def size(self) -> int:
        return self.cells.size

    def one_hot(self) -> np.ndarray:
        """The x_ijs indicator array of shape (N, M, S)."""
        return (self.cells[..., None] == np.arange(self.n_types)).astype(np.int64)

    def use_counts(self) -> np.ndarray:
        return np.bincount(self.cells.ravel(), minlength=self.n_types)

    def copy(self) -> "LandUseGrid":
        return LandUseGrid(self.cells.copy(), self.n_types, self.periodic)

    def flipped(self, cell: tuple[int, int], new_type: int) -> "LandUseGrid":
        out = self.copy()
        out.cells[cell] = new_type
        return out


@dataclass
class SuitabilityField:
    """Per-parcel, per-type suitability scores, shape (N, M, S)."""

    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 3 or self.scores.shape[2] < 2 or min(self.scores.shape[:2]) < 1:
            raise ValueError(f"scores must have shape (N, M, S>=2), got {self.scores.shape}")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("suitability scores must be finite")

    @classmethod
    def zeros(cls, rows: int, cols: int, n_types: int = 3) -> "SuitabilityField":
        return cls(np.zeros((rows, cols, n_types)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape[:2]

    @property
    def n_types(self) -> int:
        return self.scores.shape[2]

    def check_grid(self, grid: LandUseGrid) -> None:
        if self.shape != grid.shape or self.n_types != grid.n_types:
            raise DimensionMismatch(
                f"field is {self.shape}x{self.n_types}, grid is {grid.shape}x{grid.n_types}"
            )


@dataclass(frozen=True)
class PrioritySet:
    compactness: float = 1.0
    suitability: float = 0.0
    threshold: float = 1.0

    def __post_init__(self):
        if self.compactness < 0 or self.suitability < 0:
            raise ValueError("priority weights must be non-negative")
        if self.compactness == 0 and self.suitability == 0:
            raise ValueError("at least one priority weight must be positive")
        if not self.threshold > 0:
            raise ValueError("annealing threshold T must be positive")


@dataclass(frozen=True)
class EnergyBreakdown:
    compactness: float
    suitability: float
    total: float


def same_type_pairs(grid: LandUseGrid) -> int:
    """Number of unordered Moore-adjacent parcel pairs sharing a type."""
    c = grid.cells
    n, m = c.shape
    total = 0
    for di, dj in _HALF_STENCIL:
        if grid.periodic:
            total += int(np.count_nonzero(c == np.roll(c, (-di, -dj), axis=(0, 1))))
            continue
        a = c[: n - di, max(0, -dj): m - max(0, dj)]
        b = c[di:, max(0, dj): m - max(0, -dj)]
        total += int(np.count_nonzero(a == b))
    return total


def compactness_objective(grid: LandUseGrid) -> int:
    return -2 * same_type_pairs(grid)


def suitability_objective(grid: LandUseGrid, field: SuitabilityField) -> float:
    field.check_grid(grid)
    picked = np.take_along_axis(field.scores, grid.cells[..., None], axis=2)
    return -float(picked.sum())


def total_energy(grid: LandUseGrid, field: SuitabilityField, priorities: PrioritySet) -> EnergyBreakdown:
    o1 = compactness_objective(grid)
    o2 = suitability_objective(grid, field)
    return EnergyBreakdown(o1, o2, priorities.compactness * o1 + priorities.suitability * o2)


def moore_neighbours(grid: LandUseGrid, i: int, j: int):
    n, m = grid.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            a, b = i + di, j + dj
            if grid.periodic:
                yield a % n, b % m
            elif 0 <= a < n and 0 <= b < m:
                yield a, b


def delta_energy_flip(grid: LandUseGrid, field: SuitabilityField, priorities: PrioritySet,
                      cell: tuple[int, int], new_type: int) -> float:
    """H after setting ``cell`` to ``new_type`` minus H now, from local terms only."""
    field.check_grid(grid)
    i, j = cell
    if not (0 <= i < grid.rows and 0 <= j < grid.cols):
        raise IndexError(f"cell {cell} outside a {grid.shape} grid")
    if not 0 <= new_type < grid.n_types:
        raise ValueError(f"type {new_type} outside [0, {grid.n_types})")
    old = grid.cells[i, j]
    if old == new_type:
        return 0.0
    matches_old = matches_new = 0
    for a, b in moore_neighbours(grid, i, j):
        v = grid.cells[a, b]
        matches_old += v == old
        matches_new += v == new_type
    d_o1 = 2 * (matches_old - matches_new)
    d_o2 = field.scores[i, j, old] - field.scores[i, j, new_type]
    return priorities.compactness * d_o1 + priorities.suitability * d_o2


# --- file formats -----------------------------------------------------------

def read_grid_csv(path, n_types: int = 3) -> LandUseGrid:
    cells = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    return LandUseGrid(cells, n_types)


def write_grid_csv(grid: LandUseGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(grid.cells.tolist())


def read_suitability_csv(path) -> SuitabilityField:
    """Long-form ``i,j,s,c`` table; every (i, j, s) must appear exactly once."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["i", "j", "s", "c"]:
            raise ValueError(f"{path}: expected header i,j,s,c")
        rows = [(int(r["i"]), int(r["j"]), int(r["s"]), float(r["c"])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: no suitability rows")
    idx = np.array([r[:3] for r in rows])
    if idx.min() < 0:
        raise ValueError(f"{path}: indices must be 0-based and non-negative")
    n, m, s = (idx.max(axis=0) + 1).tolist()
    scores = np.full((n, m, s), np.nan)
    seen = np.zeros((n, m, s), dtype=bool)
    for i, j, k, c in rows:
        if seen[i, j, k]:
            raise ValueError(f"{path}: duplicate entry for (i={i}, j={j}, s={k})")
        seen[i, j, k] = True
        scores[i, j, k] = c
    if not seen.all():
        missing = np.argwhere(~seen)[0]
        raise ValueError(f"{path}: missing entry for (i={missing[0]}, j={missing[1]}, s={missing[2]})"
                         f" and {int((~seen).sum()) - 1} more")
    return SuitabilityField(scores)


def read_suitability_layers(stem, n_types: int) -> SuitabilityField:
    """Layered form: one N x M matrix per type in ``<stem>.<s>.csv``."""
    layers = [np.loadtxt(f"{stem}.{s}.csv", delimiter=",", ndmin=2) for s in range(n_types)]
    if len({layer.shape for layer in layers}) != 1:
        raise DimensionMismatch("suitability layers have different shapes")
    return SuitabilityField(np.stack(layers, axis=2))


def write_suitability_csv(field: SuitabilityField, path) -> None:
    n, m, s = field.scores.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "s", "c"])
        for i in range(n):
            for j in range(m):
                for k in range(s):
                    w.writerow([i, j, k, repr(float(field.scores[i, j, k]))])


def load_suitability(path, n_types: int | None = None) -> SuitabilityField:
    path = Path(path)
    if path.exists():
        return read_suitability_csv(path)
    if n_types is None:
        raise FileNotFoundError(path)
    return read_suitability_layers(str(path.with_suffix("")) if path.suffix == ".csv" else str(path), n_types)
