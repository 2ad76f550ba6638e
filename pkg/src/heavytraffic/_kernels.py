"""Compiled inner loops for the three simulators.

Random numbers are drawn outside (numpy ``Generator``) and handed in by
chunk so that a stream is reproducible regardless of chunk boundaries.
A sample is recorded after slot ``s`` completes when ``s > burn_in`` and
``(s - burn_in) % thin == 0``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def hungarian_min(cost):
    """Row -> column assignment minimising total cost (shortest augmenting path, O(n^3))."""
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    return perm


@njit(cache=True)
def maxweight_perm(q, n):
    cost = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            cost[i, j] = -float(q[i + n * j])
    return hungarian_min(cost)


@njit(cache=True)
def _record(s, burn_in, thin):
    return s > burn_in and (s - burn_in) % thin == 0


@njit(cache=True)
def switch_chunk(q, arrivals, n, t, burn_in, thin, out_q, out_u, out_slot, n_out):
    m = n * n
    s_vec = np.zeros(m, dtype=np.int64)
    u = np.zeros(m, dtype=np.int64)
    for row in range(arrivals.shape[0]):
        if n_out >= out_q.shape[0]:
            break
        perm = maxweight_perm(q, n)
        s_vec[:] = 0
        for i in range(n):
            s_vec[i + n * perm[i]] = 1
        for k in range(m):
            x = q[k] + arrivals[row, k] - s_vec[k]
            if x < 0:
                u[k] = -x
                q[k] = 0
            else:
                u[k] = 0
                q[k] = x
        t += 1
        if _record(t, burn_in, thin):
            out_q[n_out, :] = q
            out_u[n_out, :] = u
            out_slot[n_out] = t
            n_out += 1
    return t, n_out


@njit(cache=True)
def threeq_chunk(q, arrivals, t, burn_in, thin, out_q, out_u, out_slot, n_out):
    s_vec = np.zeros(3, dtype=np.int64)
    u = np.zeros(3, dtype=np.int64)
    for row in range(arrivals.shape[0]):
        if n_out >= out_q.shape[0]:
            break
        if q[0] > q[1] + q[2]:
            s_vec[0] = 1
            s_vec[1] = 0
            s_vec[2] = 0
        else:
            s_vec[0] = 0
            s_vec[1] = 1
            s_vec[2] = 1
        for k in range(3):
            x = q[k] + arrivals[row, k] - s_vec[k]
            if x < 0:
                u[k] = -x
                q[k] = 0
            else:
                u[k] = 0
                q[k] = x
        t += 1
        if _record(t, burn_in, thin):
            out_q[n_out, :] = q
            out_u[n_out, :] = u
            out_slot[n_out] = t
            n_out += 1
    return t, n_out


@njit(cache=True)
def nsys_event(q1, q2, x, lam1, lam2, mu1, mu2):
    """Apply the uniformized event selected by ``x`` in ``[0, lam1+lam2+mu1+mu2)``."""
    if x < lam1:
        return q1 + 1, q2
    x -= lam1
    if x < lam2:
        return q1, q2 + 1
    x -= lam2
    if q1 > q2:
        if x < mu1:
            return q1 - 1, q2
        x -= mu1
        if x < mu2 and q2 > 0:
            return q1, q2 - 1
        return q1, q2
    if x < mu1 + mu2 and q2 > 0:
        return q1, q2 - 1
    return q1, q2


@njit(cache=True)
def nsys_chunk(q, uniforms, lam1, lam2, mu1, mu2, t, burn_in, thin, out_q, out_ind, out_slot, n_out):
    rate = lam1 + lam2 + mu1 + mu2
    q1 = q[0]
    q2 = q[1]
    for row in range(uniforms.shape[0]):
        if n_out >= out_q.shape[0]:
            break
        q1, q2 = nsys_event(q1, q2, uniforms[row] * rate, lam1, lam2, mu1, mu2)
        t += 1
        if _record(t, burn_in, thin):
            out_q[n_out, 0] = q1
            out_q[n_out, 1] = q2
            out_ind[n_out, 0] = 1 if q1 <= q2 else 0
            out_ind[n_out, 1] = 1 if q2 == 0 else 0
            out_ind[n_out, 2] = 1 if (q1 == 0 and q2 == 0) else 0
            out_slot[n_out] = t
            n_out += 1
    q[0] = q1
    q[1] = q2
    return t, n_out
