"""Compiled inner loops for the samplers.

Random numbers come from xoshiro256** with an explicit 4-word state array,
so every chain owns its stream and nothing touches a global generator.
"""

import numpy as np
from numba import njit, uint64

_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(state):
    result = _rotl(state[1] * uint64(5), 7) * uint64(9)
    t = state[1] << uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True)
def uniform(state):
    return np.float64(next_u64(state) >> uint64(11)) * _TO_UNIT


@njit(cache=True)
def below(state, n):
    # multiply-shift on the top 32 bits; n is always far below 2**32 here
    return np.int64(((next_u64(state) >> uint64(32)) * uint64(n)) >> uint64(32))


@njit(cache=True)
def random_fill(cells, n_types, state):
    n, m = cells.shape
    for i in range(n):
        for j in range(m):
            cells[i, j] = below(state, n_types)


@njit(cache=True)
def neighbour_matches(cells, i, j, a, b, periodic):
    """Count Moore neighbours of (i, j) holding type a and type b."""
    n, m = cells.shape
    na = 0
    nb = 0
    for di in range(-1, 2):
        ii = i + di
        if periodic:
            ii %= n
        elif ii < 0 or ii >= n:
            continue
        for dj in range(-1, 2):
            if di == 0 and dj == 0:
                continue
            jj = j + dj
            if periodic:
                jj %= m
            elif jj < 0 or jj >= m:
                continue
            v = cells[ii, jj]
            if v == a:
                na += 1
            elif v == b:
                nb += 1
    return na, nb


@njit(cache=True)
def same_type_pairs(cells, periodic):
    n, m = cells.shape
    total = 0
    for i in range(n):
        for j in range(m):
            same, _ = neighbour_matches(cells, i, j, cells[i, j], -1, periodic)
            total += same
    return total // 2


@njit(cache=True)
def metropolis_sweeps(cells, scores, pc, ps, temps, periodic, state, counts):
    """One sweep per entry of ``temps``; each sweep proposes N*M single flips.

    Returns (accepted, change in O1, change in O2).
    """
    n, m = cells.shape
    n_types = scores.shape[2]
    accepted = 0
    d_o1 = 0
    d_o2 = 0.0
    for t in temps:
        for _ in range(n * m):
            i = below(state, n)
            j = below(state, m)
            old = cells[i, j]
            new = below(state, n_types - 1)
            if new >= old:
                new += 1
            n_old, n_new = neighbour_matches(cells, i, j, old, new, periodic)
            do1 = 2 * (n_old - n_new)
            do2 = scores[i, j, old] - scores[i, j, new]
            dh = pc * do1 + ps * do2
            if dh <= 0.0 or uniform(state) < np.exp(-dh / t):
                cells[i, j] = new
                counts[old] -= 1
                counts[new] += 1
                accepted += 1
                d_o1 += do1
                d_o2 += do2
    return accepted, d_o1, d_o2


@njit(cache=True)
def wolff_move(cells, scores, pc, ps, t, periodic, state, counts, members, mark):
    """One ghost-field cluster move.

    The seed parcel's type ``a`` and a uniformly drawn target ``b != a`` fix the
    transposition. Bonds join equal-type Moore neighbours with probability
    1 - exp(-2 pc / t). A parcel whose score favours ``a`` over ``b`` by g > 0
    bonds to the ghost with probability 1 - exp(-ps g / t); a cluster that
    reaches the ghost is left as is.

    Returns (cluster size incl. ghost, flipped, change in O1, change in O2).
    """
    n, m = cells.shape
    n_types = scores.shape[2]
    seed = below(state, n * m)
    si = seed // m
    sj = seed % m
    a = cells[si, sj]
    b = below(state, n_types - 1)
    if b >= a:
        b += 1
    p_bond = 1.0 - np.exp(-2.0 * pc / t)

    members[0] = seed
    mark[si, sj] = True
    size = 1
    head = 0
    ghost = False
    while head < size:
        x = members[head]
        head += 1
        i = x // m
        j = x % m
        g = ps * (scores[i, j, a] - scores[i, j, b])
        if g > 0.0 and uniform(state) < 1.0 - np.exp(-g / t):
            ghost = True
            break
        if p_bond == 0.0:
            continue
        for di in range(-1, 2):
            ii = i + di
            if periodic:
                ii %= n
            elif ii < 0 or ii >= n:
                continue
            for dj in range(-1, 2):
                if di == 0 and dj == 0:
                    continue
                jj = j + dj
                if periodic:
                    jj %= m
                elif jj < 0 or jj >= m:
                    continue
                if cells[ii, jj] == a and not mark[ii, jj] and uniform(state) < p_bond:
                    mark[ii, jj] = True
                    members[size] = ii * m + jj
                    size += 1

    d_o1 = 0
    d_o2 = 0.0
    if not ghost:
        for k in range(size):
            x = members[k]
            i = x // m
            j = x % m
            # boundary pairs only: in-cluster neighbours are marked and skipped
            for di in range(-1, 2):
                ii = i + di
                if periodic:
                    ii %= n
                elif ii < 0 or ii >= n:
                    continue
                for dj in range(-1, 2):
                    if di == 0 and dj == 0:
                        continue
                    jj = j + dj
                    if periodic:
                        jj %= m
                    elif jj < 0 or jj >= m:
                        continue
                    if mark[ii, jj]:
                        continue
                    v = cells[ii, jj]
                    if v == a:
                        d_o1 += 2
                    elif v == b:
                        d_o1 -= 2
            d_o2 += scores[i, j, a] - scores[i, j, b]
        for k in range(size):
            x = members[k]
            cells[x // m, x % m] = b
        counts[a] -= size
        counts[b] += size
    for k in range(size):
        x = members[k]
        mark[x // m, x % m] = False
    if ghost:
        return size + 1, False, 0, 0.0
    return size, True, d_o1, d_o2


@njit(cache=True)
def wolff_sweeps(cells, scores, pc, ps, temps, periodic, state, counts, members, mark, interleave):
    """One cluster move per sweep, optionally followed by a Metropolis sweep.

    Returns (flipped clusters, summed cluster size, change in O1, change in O2).
    """
    flips = 0
    total_size = 0
    d_o1 = 0
    d_o2 = 0.0
    one = np.empty(1)
    for t in temps:
        size, flipped, a, b = wolff_move(cells, scores, pc, ps, t, periodic, state, counts, members, mark)
        total_size += size
        if flipped:
            flips += 1
            d_o1 += a
            d_o2 += b
        if interleave:
            one[0] = t
            _, a, b = metropolis_sweeps(cells, scores, pc, ps, one, periodic, state, counts)
            d_o1 += a
            d_o2 += b
    return flips, total_size, d_o1, d_o2
