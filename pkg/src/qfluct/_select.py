"""Exact k-th smallest selection: three-way-partition quickselect.

Pivots come from a small xorshift generator seeded per row, so results and
running time are reproducible.  Input rows are copied, never modified.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _xorshift(state):
    state ^= (state << np.uint64(13)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    state ^= state >> np.uint64(7)
    state ^= (state << np.uint64(17)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state


@njit(cache=True)
def _select_inplace(a, k, seed):
    # returns the k-th smallest (0-based) of a, permuting a
    lo = 0
    hi = a.shape[0] - 1
    state = np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(1)
    while lo < hi:
        state = _xorshift(state)
        p = a[lo + np.int64(state % np.uint64(hi - lo + 1))]
        # Dutch flag: [lo, lt) < p, [lt, i) == p, (gt, hi] > p
        lt = lo
        i = lo
        gt = hi
        while i <= gt:
            v = a[i]
            if v < p:
                a[i] = a[lt]
                a[lt] = v
                lt += 1
                i += 1
            elif v > p:
                a[i] = a[gt]
                a[gt] = v
                gt -= 1
            else:
                i += 1
        if k < lt:
            hi = lt - 1
        elif k > gt:
            lo = gt + 1
        else:
            return p
    return a[lo]


@njit(cache=True)
def _select_rows(x, k, seed):
    out = np.empty(x.shape[0])
    buf = np.empty(x.shape[1])
    for r in range(x.shape[0]):
        buf[:] = x[r]
        out[r] = _select_inplace(buf, k, seed + r)
    return out


def select_rows(x, j: int, seed: int = 0) -> np.ndarray:
    """``j``-th smallest (1-based) of every row of a 2-d array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("select_rows expects a 2-d array")
    n = x.shape[1]
    if not 1 <= j <= n:
        raise ValueError(f"j={j} outside [1, {n}]")
    if np.isnan(x).any():
        raise ValueError("cannot select among NaN values")
    return _select_rows(x, j - 1, int(seed) & 0xFFFFFFFF)


def quickselect(values, j: int, seed: int = 0) -> float:
    """``j``-th smallest (1-based) of a 1-d array."""
    return float(select_rows(np.asarray(values, dtype=np.float64)[None, :], j, seed)[0])
