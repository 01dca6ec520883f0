"""NumPy fallback for the hot kernels.

Same signatures as the compiled extension ``xkmedians._kernels``; selected
at import time by :mod:`xkmedians.kernels`.  All routines are pure
numerics: any randomness is drawn by the caller.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

# Points are processed in chunks to bound the size of broadcast temporaries.
_CHUNK = 2048


def pow_dist_one(points: np.ndarray, center: np.ndarray, p: float) -> np.ndarray:
    """sum_i |x_i - c_i|^p for every row x of ``points``."""
    return np.abs(points - center[None, :]) ** p @ np.ones(points.shape[1])


def min_pow_dist(points: np.ndarray, centers: np.ndarray, p: float):
    """Per point: (min over centers of sum|x-c|^p, argmin index)."""
    n = points.shape[0]
    best = np.empty(n)
    arg = np.empty(n, dtype=np.int64)
    for s in range(0, n, _CHUNK):
        chunk = points[s : s + _CHUNK]
        d = (np.abs(chunk[:, None, :] - centers[None, :, :]) ** p).sum(axis=2)
        arg[s : s + _CHUNK] = d.argmin(axis=1)
        best[s : s + _CHUNK] = d[np.arange(len(chunk)), arg[s : s + _CHUNK]]
    return best, arg


def nearest_two(points: np.ndarray, centers: np.ndarray, p: float):
    """Per point: (nearest pow-dist, its index, second-nearest pow-dist)."""
    n, k = points.shape[0], centers.shape[0]
    d1 = np.empty(n)
    a1 = np.empty(n, dtype=np.int64)
    d2 = np.empty(n)
    for s in range(0, n, _CHUNK):
        chunk = points[s : s + _CHUNK]
        d = (np.abs(chunk[:, None, :] - centers[None, :, :]) ** p).sum(axis=2)
        idx = d.argmin(axis=1)
        rows = np.arange(len(chunk))
        a1[s : s + _CHUNK] = idx
        d1[s : s + _CHUNK] = d[rows, idx]
        if k == 1:
            d2[s : s + _CHUNK] = np.inf
        else:
            d[rows, idx] = np.inf
            d2[s : s + _CHUNK] = d.min(axis=1)
    return d1, a1, d2


def best_swap_batch(
    points: np.ndarray,
    cand_rows: np.ndarray,
    p: float,
    d1: np.ndarray,
    a1: np.ndarray,
    d2: np.ndarray,
    k: int,
):
    """Best single swap over candidate in-points.

    ``d1``/``d2`` are the nearest/second-nearest *distances* (not powers)
    to the current centers, ``a1`` the nearest index.  Returns
    (candidate position, center index to drop, resulting total cost).
    """
    inv = 1.0 / p
    best_cost = np.inf
    best_pos = -1
    best_out = -1
    for pos, r in enumerate(cand_rows):
        dx = pow_dist_one(points, points[r], p) ** inv
        keep = np.minimum(d1, dx)
        base = keep.sum()
        # Removing center j frees its points to max(second nearest, candidate).
        delta = np.bincount(
            a1, weights=np.minimum(d2, dx) - keep, minlength=k
        )
        j = int(delta.argmin())
        cost = base + delta[j]
        if cost < best_cost:
            best_cost, best_pos, best_out = cost, pos, j
    return best_pos, best_out, best_cost


def first_separating(
    coords: np.ndarray, feats: np.ndarray, thresholds: np.ndarray
) -> int:
    """Index of the first candidate cut splitting ``coords``; -1 if none.

    A cut (feats[j], thresholds[j]) splits when both {x_f < t} and
    {x_f >= t} are non-empty.
    """
    cols = coords[:, feats]  # (n, B)
    lt = cols < thresholds[None, :]
    sep = lt.any(axis=0) & (~lt).any(axis=0)
    hits = np.nonzero(sep)[0]
    return int(hits[0]) if hits.size else -1


def route_points(
    feat: np.ndarray,
    thresh: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    leaf_center: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """Route every point through an array-encoded threshold tree."""
    n = points.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if points[i, feat[node]] < thresh[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_center[node]
    return out
