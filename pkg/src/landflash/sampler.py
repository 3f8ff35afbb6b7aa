"""Markov chain Monte Carlo sampling of land-use patterns.

Two kernels target the same Gibbs distribution exp(-H/T): a single-flip
Metropolis sweep and a ghost-field Wolff cluster move. ``run_anneal`` drives
either through the thermalize / cool / equilibrate / measure protocol, and
``run_replicates`` fans independent seeds out over worker processes.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .lattice import (EnergyBreakdown, LandUseGrid, PrioritySet, SuitabilityField,
                      compactness_objective, suitability_objective)

log = logging.getLogger(__name__)

SAMPLERS = ("metropolis", "wolff")


class StreamRNG:
    """xoshiro256** stream keyed by (master seed, replicate seed)."""

    def __init__(self, seed: int, master_seed: int = 0):
        if not (0 <= seed < 2**64 and 0 <= master_seed < 2**64):
            raise ValueError("seeds must be unsigned 64-bit integers")
        self.seed = seed
        self.master_seed = master_seed
        words = np.random.SeedSequence([master_seed, seed]).generate_state(4, dtype=np.uint64)
        if not words.any():
            words[0] = 1
        self.state = words

    def uniform(self) -> float:
        return float(K.uniform(self.state))

    def below(self, n: int) -> int:
        return int(K.below(self.state, n))


@dataclass(frozen=True)
class AnnealSchedule:
    """Temperature protocol; the defaults are the 30x30 flashpoint protocol."""

    t_start: float = 15.0
    t_target: float = 1.0
    thermalize_sweeps: int = 1000
    cool_sweeps: int = 35000
    equilibrate_sweeps: int = 10000
    measure_sweeps: int = 10000
    measure_interval: int = 50

    def __post_init__(self):
        counts = ("thermalize_sweeps", "cool_sweeps", "equilibrate_sweeps", "measure_sweeps")
        for name in counts:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.measure_interval < 1:
            raise ValueError("measure_interval must be >= 1")
        if not self.t_start >= self.t_target > 0:
            raise ValueError("need t_start >= t_target > 0")

    @classmethod
    def fixed(cls, t: float, equilibrate_sweeps: int, measure_sweeps: int, measure_interval: int = 1):
        """Hold a single temperature throughout (no cooling)."""
        return cls(t, t, 0, 0, equilibrate_sweeps, measure_sweeps, measure_interval)

    @property
    def n_records(self) -> int:
        return self.measure_sweeps // self.measure_interval

    @property
    def total_sweeps(self) -> int:
        return self.thermalize_sweeps + self.cool_sweeps + self.equilibrate_sweeps + self.measure_sweeps

    def cooling_temperatures(self) -> np.ndarray:
        # linear in sweep index, last cooling sweep lands on t_target
        k = np.arange(1, self.cool_sweeps + 1)
        return self.t_start + (self.t_target - self.t_start) * k / max(self.cool_sweeps, 1)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleRecord:
    sweep: int
    use_counts: tuple
    energy: EnergyBreakdown
    snapshot: np.ndarray | None = None


class Chain:
    """A grid plus its RNG stream, with O1, O2 and use counts tracked incrementally."""

    def __init__(self, grid: LandUseGrid, field: SuitabilityField, priorities: PrioritySet,
                 rng: StreamRNG):
        field.check_grid(grid)
        self.grid = grid
        self.field = field
        self.priorities = priorities
        self.rng = rng
        self.counts = grid.use_counts().astype(np.int64)
        self.o1 = compactness_objective(grid)
        self.o2 = suitability_objective(grid, field)
        self.sweeps = 0
        self._members = np.empty(grid.size, dtype=np.int64)
        self._mark = np.zeros(grid.shape, dtype=np.bool_)

    @classmethod
    def random(cls, field: SuitabilityField, priorities: PrioritySet, rng: StreamRNG,
               periodic: bool = False) -> "Chain":
        cells = np.empty(field.shape, dtype=np.int64)
        K.random_fill(cells, field.n_types, rng.state)
        return cls(LandUseGrid(cells, field.n_types, periodic), field, priorities, rng)

    def metropolis(self, temps) -> int:
        temps = np.ascontiguousarray(temps, dtype=np.float64)
        acc, d1, d2 = K.metropolis_sweeps(self.grid.cells, self.field.scores,
                                          float(self.priorities.compactness),
                                          float(self.priorities.suitability), temps,
                                          self.grid.periodic, self.rng.state, self.counts)
        self.o1 += d1
        self.o2 += d2
        self.sweeps += len(temps)
        return acc

    def wolff(self, temps, interleave: bool = True) -> tuple[int, int]:
        temps = np.ascontiguousarray(temps, dtype=np.float64)
        flips, size, d1, d2 = K.wolff_sweeps(self.grid.cells, self.field.scores,
                                             float(self.priorities.compactness),
                                             float(self.priorities.suitability), temps,
                                             self.grid.periodic, self.rng.state, self.counts,
                                             self._members, self._mark, interleave)
        self.o1 += d1
        self.o2 += d2
        self.sweeps += len(temps)
        return flips, size

    def run(self, temps, sampler: str, interleave: bool = True) -> None:
        if len(temps) == 0:
            return
        if sampler == "metropolis":
            self.metropolis(temps)
        elif sampler == "wolff":
            self.wolff(temps, interleave)
        else:
            raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")

    def energy(self) -> EnergyBreakdown:
        p = self.priorities
        return EnergyBreakdown(self.o1, self.o2, p.compactness * self.o1 + p.suitability * self.o2)

    def recomputed_energy(self) -> EnergyBreakdown:
        o1 = compactness_objective(self.grid)
        o2 = suitability_objective(self.grid, self.field)
        p = self.priorities
        return EnergyBreakdown(o1, o2, p.compactness * o1 + p.suitability * o2)

    def record(self, snapshot: bool = False) -> SampleRecord:
        # O2 is re-summed so records do not carry incremental round-off
        o2 = suitability_objective(self.grid, self.field)
        p = self.priorities
        e = EnergyBreakdown(self.o1, o2, p.compactness * self.o1 + p.suitability * o2)
        snap = self.grid.cells.astype(np.int8) if snapshot else None
        return SampleRecord(self.sweeps, tuple(int(c) for c in self.counts), e, snap)


def metropolis_sweep(grid: LandUseGrid, field: SuitabilityField, priorities: PrioritySet,
                     rng: StreamRNG) -> tuple[LandUseGrid, int]:
    """N*M single-flip proposals at ``priorities.threshold``; mutates ``grid``."""
    field.check_grid(grid)
    counts = grid.use_counts().astype(np.int64)
    temps = np.array([priorities.threshold])
    acc, _, _ = K.metropolis_sweeps(grid.cells, field.scores, float(priorities.compactness),
                                    float(priorities.suitability), temps, grid.periodic,
                                    rng.state, counts)
    return grid, int(acc)


def wolff_step(grid: LandUseGrid, field: SuitabilityField, priorities: PrioritySet,
               rng: StreamRNG) -> tuple[LandUseGrid, int]:
    """A single ghost-field cluster move; mutates ``grid``.

    The returned size counts the ghost when the cluster reached it (and was
    therefore not flipped).
    """
    field.check_grid(grid)
    counts = grid.use_counts().astype(np.int64)
    members = np.empty(grid.size, dtype=np.int64)
    mark = np.zeros(grid.shape, dtype=np.bool_)
    size, _, _, _ = K.wolff_move(grid.cells, field.scores, float(priorities.compactness),
                                 float(priorities.suitability), float(priorities.threshold),
                                 grid.periodic, rng.state, counts, members, mark)
    return grid, int(size)


def anneal(chain: Chain, schedule: AnnealSchedule, sampler: str = "metropolis",
           interleave: bool = True, snapshots: bool = False) -> list[SampleRecord]:
    """Run ``schedule`` on an existing chain and return the measurement records."""
    chain.run(np.full(schedule.thermalize_sweeps, schedule.t_start), sampler, interleave)
    chain.run(schedule.cooling_temperatures(), sampler, interleave)
    chain.run(np.full(schedule.equilibrate_sweeps, schedule.t_target), sampler, interleave)
    records = []
    block = np.full(schedule.measure_interval, schedule.t_target)
    for _ in range(schedule.n_records):
        chain.run(block, sampler, interleave)
        records.append(chain.record(snapshots))
    tail = schedule.measure_sweeps - schedule.n_records * schedule.measure_interval
    chain.run(np.full(tail, schedule.t_target), sampler, interleave)
    return records


def run_anneal(field: SuitabilityField, priorities: PrioritySet, schedule: AnnealSchedule,
               seed: int, sampler: str = "metropolis", *, master_seed: int = 0,
               interleave: bool = True, snapshots: bool = False,
               periodic: bool = False) -> list[SampleRecord]:
    """Anneal one replicate from a random start; deterministic in (master_seed, seed)."""
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    chain = Chain.random(field, priorities, StreamRNG(seed, master_seed), periodic)
    return anneal(chain, schedule, sampler, interleave, snapshots)


@dataclass
class ReplicateSet:
    field: SuitabilityField
    priorities: PrioritySet
    schedule: AnnealSchedule
    sampler: str
    seeds: list
    records: dict = field(default_factory=dict)
    master_seed: int = 0
    interleave: bool = True

    @property
    def n_cells(self) -> int:
        n, m = self.field.shape
        return n * m

    @property
    def n_types(self) -> int:
        return self.field.n_types

    def all_records(self) -> list[SampleRecord]:
        return [r for s in self.seeds for r in self.records[s]]

    def count_matrix(self) -> np.ndarray:
        """Use counts of every record, shape (n_records, S), in seed order."""
        recs = self.all_records()
        if not recs:
            return np.empty((0, self.n_types), dtype=np.int64)
        return np.array([r.use_counts for r in recs], dtype=np.int64)

    def snapshots(self) -> list[np.ndarray]:
        return [r.snapshot for r in self.all_records() if r.snapshot is not None]


def _replicate_job(args):
    field, priorities, schedule, seed, sampler, master_seed, interleave, snapshots, periodic = args
    return seed, run_anneal(field, priorities, schedule, seed, sampler, master_seed=master_seed,
                            interleave=interleave, snapshots=snapshots, periodic=periodic)


def run_replicates(field: SuitabilityField, priorities: PrioritySet, schedule: AnnealSchedule,
                   seeds: Sequence[int], sampler: str = "metropolis", parallelism: int = 1, *,
                   master_seed: int = 0, interleave: bool = True, snapshots: bool = False,
                   periodic: bool = False) -> ReplicateSet:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        dupes = sorted({s for s in seeds if seeds.count(s) > 1})
        raise ValueError(f"duplicate seeds: {dupes}")
    jobs = [(field, priorities, schedule, s, sampler, master_seed, interleave, snapshots, periodic)
            for s in seeds]
    out = ReplicateSet(field, priorities, schedule, sampler, seeds, master_seed=master_seed,
                       interleave=interleave)
    if parallelism <= 1:
        results: Iterable = map(_replicate_job, jobs)
        for seed, recs in results:
            out.records[seed] = recs
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for seed, recs in pool.map(_replicate_job, jobs, chunksize=max(1, len(jobs) // (4 * parallelism))):
                out.records[seed] = recs
    return out


SAMPLE_HEADER_BASE = ("seed", "sweep")


def sample_rows(reps: ReplicateSet):
    for s in reps.seeds:
        for r in reps.records[s]:
            e = r.energy
            yield [s, r.sweep, *r.use_counts, int(e.compactness), repr(float(e.suitability)),
                   repr(float(e.total))]


def write_samples_csv(reps: ReplicateSet, path) -> None:
    header = [*SAMPLE_HEADER_BASE, *(f"N_{k}" for k in range(reps.n_types)), "O1", "O2", "H"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(sample_rows(reps))


def read_samples_csv(path) -> dict[int, list[SampleRecord]]:
    """Inverse of ``write_samples_csv``; records keyed by seed, in file order."""
    out: dict[int, list[SampleRecord]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_types = sum(1 for h in header if h.startswith("N_"))
        for row in reader:
            seed, sweep = int(row[0]), int(row[1])
            counts = tuple(int(v) for v in row[2:2 + n_types])
            o1, o2, h = (float(v) for v in row[2 + n_types:5 + n_types])
            out.setdefault(seed, []).append(SampleRecord(sweep, counts, EnergyBreakdown(o1, o2, h)))
    return out
