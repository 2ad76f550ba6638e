"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools

import numpy as np


def brute_force_maxweight(q, n):
    best, best_perm = -1, None
    for perm in itertools.permutations(range(n)):
        w = sum(q[i + n * perm[i]] for i in range(n))
        if w > best:
            best, best_perm = w, perm
    return best, best_perm


def active_set_enumeration(B, x):
    """Projection onto {B r : r >= 0} by trying every support set."""
    k = B.shape[1]
    best, best_par = np.inf, None
    for mask in range(1 << k):
        cols = [j for j in range(k) if mask >> j & 1]
        if not cols:
            par = np.zeros_like(x)
        else:
            sub = B[:, cols]
            r = np.linalg.lstsq(sub, x, rcond=None)[0]
            if np.any(r < -1e-12):
                continue
            par = sub @ r
        d = np.linalg.norm(x - par)
        if d < best - 1e-13:
            best, best_par = d, par
    return best_par


def dense_projection(B, x):
    w = np.linalg.lstsq(B, x, rcond=None)[0]
    return B @ w
