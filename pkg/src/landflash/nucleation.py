"""Boundary/area balance for reallocating a region of parcels.

Flipping a region R costs the broken compactness bonds along its boundary and
gains the on-site suitability margin over its area:

    dF = dE_M * L(R) - dE_O * A(R)

Two boundary measures are offered. ``"edge"`` counts exposed 4-neighbour
parcel edges (map edges count as exposed). ``"exact"`` counts in-bounds Moore
pairs straddling the boundary, which reproduces the lattice compactness term
exactly when every boundary neighbour holds the region's original type.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .lattice import PrioritySet, SuitabilityField

# compactness cost of one broken Moore pair, in units of P_C
PAIR_COST = 2.0
# a straight axis-aligned interface breaks three Moore pairs per parcel edge
PAIRS_PER_EDGE = 3

MODES = ("exact", "edge")


class NoOnsiteIncentive(ValueError):
    """The region does not favour the target type, so it never flips."""


@dataclass
class RegionMask:
    members: np.ndarray

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=bool)
        if self.members.ndim != 2:
            raise ValueError("mask must be 2-D")

    @classmethod
    def rectangle(cls, shape, top: int, left: int, height: int, width: int) -> "RegionMask":
        m = np.zeros(shape, dtype=bool)
        if top < 0 or left < 0 or top + height > shape[0] or left + width > shape[1]:
            raise ValueError("rectangle exceeds the map")
        m[top:top + height, left:left + width] = True
        return cls(m)

    @property
    def shape(self):
        return self.members.shape

    @property
    def area(self) -> int:
        return int(self.members.sum())

    def _require_nonempty(self):
        if not self.members.any():
            raise ValueError("region mask is empty")

    def edge_length(self) -> int:
        self._require_nonempty()
        padded = np.pad(self.members, 1)
        inner = padded[1:-1, 1:-1]
        exposed = 0
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
            exposed += int(np.count_nonzero(inner & ~nb))
        return exposed

    def moore_pairs(self) -> int:
        """In-bounds Moore pairs with exactly one parcel inside the region."""
        self._require_nonempty()
        m = self.members
        n, k = m.shape
        pairs = 0
        for di, dj in ((0, 1), (1, -1), (1, 0), (1, 1)):
            a = m[: n - di, max(0, -dj): k - max(0, dj)]
            b = m[di:, max(0, dj): k - max(0, -dj)]
            pairs += int(np.count_nonzero(a != b))
        return pairs

    def boundary(self, mode: str = "edge") -> int:
        if mode == "edge":
            return self.edge_length()
        if mode == "exact":
            return self.moore_pairs()
        raise ValueError(f"unknown boundary mode {mode!r}; expected one of {MODES}")


def read_mask_csv(path) -> RegionMask:
    return RegionMask(np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2) != 0)


def write_mask_csv(mask: RegionMask, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(mask.members.astype(int).tolist())


@dataclass(frozen=True)
class NucleationEstimate:
    delta_e_m: float
    delta_e_o: float
    delta_f: float
    flips: bool
    boundary: int
    area: int
    mode: str


def boundary_and_area(mask: RegionMask, mode: str = "edge") -> tuple[int, int]:
    return mask.boundary(mode), mask.area


def nucleation_estimate(mask: RegionMask, delta_e_m: float, delta_e_o: float,
                        mode: str = "edge") -> NucleationEstimate:
    length, area = boundary_and_area(mask, mode)
    df = delta_e_m * length - delta_e_o * area
    return NucleationEstimate(delta_e_m, delta_e_o, df, df < 0, length, area, mode)


def flip_threshold(mask: RegionMask, delta_e_m: float, mode: str = "edge") -> float:
    """Smallest per-area on-site gain for which flipping the region pays off."""
    if delta_e_m < 0:
        raise ValueError("delta_e_m must be non-negative")
    length, area = boundary_and_area(mask, mode)
    return delta_e_m * length / area


def boundary_cost(priorities: PrioritySet, mode: str = "exact") -> float:
    """dE_M in Hamiltonian units per unit of the chosen boundary measure."""
    per_pair = PAIR_COST * priorities.compactness
    return per_pair if mode == "exact" else PAIRS_PER_EDGE * per_pair


def region_margin(mask: RegionMask, field: SuitabilityField, from_type: int, to_type: int) -> float:
    if mask.shape != field.shape:
        raise ValueError("mask and field shapes differ")
    mask._require_nonempty()
    diff = field.scores[..., to_type] - field.scores[..., from_type]
    return float(diff[mask.members].mean())


@dataclass(frozen=True)
class FlashpointPrediction:
    boundary: int
    area: int
    mode: str
    delta_e_m: float
    margin: float
    p_s_star: float


def predict_flashpoint_priority(mask: RegionMask, field: SuitabilityField, from_type: int,
                                to_type: int, priorities: PrioritySet,
                                mode: str = "exact") -> FlashpointPrediction:
    """Suitability priority above which reallocating the region lowers H."""
    margin = region_margin(mask, field, from_type, to_type)
    if margin <= 0:
        raise NoOnsiteIncentive(f"mean margin {margin:g} of type {to_type} over {from_type} is not positive")
    length, area = boundary_and_area(mask, mode)
    dem = boundary_cost(priorities, mode)
    return FlashpointPrediction(length, area, mode, dem, margin, dem * length / (margin * area))


def write_prediction_csv(preds, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "A", "mode", "deltaEM", "m", "P_S_star"])
        for p in preds:
            w.writerow([p.boundary, p.area, p.mode, repr(p.delta_e_m), repr(p.margin), repr(p.p_s_star)])


# --- exact lattice optimum --------------------------------------------------------

def optimal_flip_region(mask: RegionMask, field: SuitabilityField, from_type: int, to_type: int,
                        priorities: PrioritySet) -> RegionMask:
    """Lowest-H subset of ``mask`` to switch to ``to_type`` inside a ``from_type`` sea.

    Two-label problem with pairwise costs only, so an s-t minimum cut is exact.
    Parcels outside the mask are held at ``from_type``.
    """
    n, m = mask.shape
    gain = priorities.suitability * (field.scores[..., to_type] - field.scores[..., from_type])
    w = PAIR_COST * priorities.compactness
    g = nx.DiGraph()
    cells = list(zip(*np.nonzero(mask.members)))
    for i, j in cells:
        node = (int(i), int(j))
        sea = 0
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                a, b = i + di, j + dj
                if not (0 <= a < n and 0 <= b < m):
                    continue
                if mask.members[a, b]:
                    g.add_edge(node, (int(a), int(b)), capacity=w)
                else:
                    sea += 1
        # source side = flipped: pays the sea bonds, forfeits nothing
        g.add_edge(node, "sea", capacity=w * sea)
        g_ij = gain[i, j]
        if g_ij > 0:
            g.add_edge("flip", node, capacity=g_ij)
        elif g_ij < 0:
            g.add_edge(node, "sea", capacity=-g_ij)
    g.add_node("flip")
    g.add_node("sea")
    _, (flip_side, _) = nx.minimum_cut(g, "flip", "sea")
    out = np.zeros(mask.shape, dtype=bool)
    for node in flip_side:
        if node != "flip":
            out[node] = True
    return RegionMask(out)


def lattice_flip_priority(mask: RegionMask, field: SuitabilityField, from_type: int, to_type: int,
                          priorities: PrioritySet, tol: float = 1e-12) -> tuple[float, RegionMask]:
    """Smallest P_S at which some subset of the mask flips at zero temperature.

    Dinkelbach iteration on boundary cost / suitability gain over subsets.
    """
    margin = region_margin(mask, field, from_type, to_type)
    if margin <= 0:
        raise NoOnsiteIncentive(f"mean margin {margin:g} of type {to_type} over {from_type} is not positive")
    diff = field.scores[..., to_type] - field.scores[..., from_type]
    w = PAIR_COST * priorities.compactness
    region = mask
    lam = w * mask.moore_pairs() / float(diff[mask.members].sum())
    for _ in range(100):
        trial = PrioritySet(priorities.compactness, lam * (1 - 1e-12), priorities.threshold)
        cand = optimal_flip_region(mask, field, from_type, to_type, trial)
        if cand.area == 0:
            break
        new = w * cand.moore_pairs() / float(diff[cand.members].sum())
        region = cand
        if new >= lam - tol:
            break
        lam = new
    return lam, region
