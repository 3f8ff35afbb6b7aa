"""Brute-force reference implementations, written independently of the package."""

import itertools
import math

import numpy as np


def moore_pairs_bruteforce(cells, periodic=False):
    """All unordered parcel pairs at Chebyshev distance 1, by full O(n^2) scan."""
    n, m = cells.shape
    sites = [(i, j) for i in range(n) for j in range(m)]
    pairs = []
    for a in range(len(sites)):
        for b in range(a + 1, len(sites)):
            (i1, j1), (i2, j2) = sites[a], sites[b]
            di, dj = abs(i1 - i2), abs(j1 - j2)
            if periodic:
                di, dj = min(di, n - di), min(dj, m - dj)
            if max(di, dj) == 1:
                pairs.append((sites[a], sites[b]))
    return pairs


def energy_bruteforce(cells, scores, pc, ps, periodic=False):
    cells = np.asarray(cells)
    same = sum(1 for p, q in moore_pairs_bruteforce(cells, periodic) if cells[p] == cells[q])
    o1 = -2 * same
    o2 = -sum(scores[i, j, cells[i, j]] for i in range(cells.shape[0]) for j in range(cells.shape[1]))
    return o1, o2, pc * o1 + ps * o2


def state_index(cells, n_types=3):
    flat = np.asarray(cells).ravel()
    return int(sum(int(v) * n_types ** k for k, v in enumerate(flat)))


def exact_boltzmann(shape, scores, pc, ps, t, n_types=3):
    """Probability of every state, indexed by ``state_index``."""
    n, m = shape
    size = n * m
    energies = np.empty(n_types ** size)
    for idx, combo in enumerate(itertools.product(range(n_types), repeat=size)):
        # product varies the last position fastest; map back to state_index order
        cells = np.array(combo[::-1]).reshape(n, m)
        energies[state_index(cells, n_types)] = energy_bruteforce(cells, scores, pc, ps)[2]
    w = np.exp(-(energies - energies.min()) / t)
    return w / w.sum()


def tv_distance(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def boundary_pairs_bruteforce(mask):
    """Moore pairs with exactly one parcel inside the mask."""
    mask = np.asarray(mask, dtype=bool)
    return sum(1 for p, q in moore_pairs_bruteforce(mask) if mask[p] != mask[q])


def exposed_edges_bruteforce(mask):
    """4-neighbour sides of member parcels facing a non-member or the map edge."""
    mask = np.asarray(mask, dtype=bool)
    n, m = mask.shape
    total = 0
    for i, j in zip(*np.nonzero(mask)):
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if not (0 <= a < n and 0 <= b < m) or not mask[a, b]:
                total += 1
    return total
