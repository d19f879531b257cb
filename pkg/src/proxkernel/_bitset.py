"""Compiled per-row cascade over packed row bitsets."""

import numpy as np
from numba import njit

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_ONE = np.uint64(1)


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(cache=True)
def _bin_counts(sets, members, j, out):
    total = 0
    for k in range(members.shape[1]):
        c = 0
        for w in range(sets.size):
            c += _popcount(sets[w] & members[j, k, w])
        out[k] = c
        total += c
    return total


@njit(cache=True)
def cascade_counts(qbins, members, full, exclude_self, starts, counts, levels):
    """Fill bin counts and levels (1 = intersection, 2 = union) per missing cell.

    ``qbins`` holds 1-based bins with 0 for missing cells; ``members[j, k]`` is
    the bitset of reference rows in bin k + 1 of feature j. Cells whose counts
    stay zero are left for the caller's global prior.
    """
    nq, d = qbins.shape
    n_words = members.shape[2]
    inter = np.empty(n_words, dtype=np.uint64)
    union = np.empty(n_words, dtype=np.uint64)
    for i in range(nq):
        n_obs = 0
        for j in range(d):
            if qbins[i, j] != 0:
                n_obs += 1
        if n_obs == 0 or n_obs == d:
            continue

        for w in range(n_words):
            inter[w] = full[w]
        if exclude_self:
            inter[i // 64] &= ~(_ONE << np.uint64(i % 64))
        nonempty = True
        for j in range(d):
            b = qbins[i, j]
            if b == 0:
                continue
            acc = np.uint64(0)
            for w in range(n_words):
                inter[w] &= members[j, b - 1, w]
                acc |= inter[w]
            if acc == 0:
                nonempty = False
                break

        have_union = False
        slot = starts[i]
        for j in range(d):
            if qbins[i, j] != 0:
                continue
            if nonempty and _bin_counts(inter, members, j, counts[slot]) > 0:
                levels[slot] = 1
                slot += 1
                continue
            if not have_union:
                for w in range(n_words):
                    union[w] = 0
                for m in range(d):
                    b = qbins[i, m]
                    if b != 0:
                        for w in range(n_words):
                            union[w] |= members[m, b - 1, w]
                if exclude_self:
                    union[i // 64] &= ~(_ONE << np.uint64(i % 64))
                have_union = True
            if _bin_counts(union, members, j, counts[slot]) > 0:
                levels[slot] = 2
            slot += 1
