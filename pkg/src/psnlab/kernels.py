"""Numba kernels for the simulation hot path.

The sequential Gauss-Seidel sweep kernel mirrors psn.tatonnement exactly
(same update rule and stopping logic) but draws its sweep orders and initial
graph from an in-kernel seeded generator, so one replication is one kernel
call.  Only degree-kind node statistics are supported here; richer models go
through the pure-Python engine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_CONVERGED = 1
STATUS_CYCLE = 0
STATUS_MAXSWEEPS = -1


@njit(cache=True)
def tatonnement_degree(utab_s, xi, eps, mcs, cap, seed, max_sweeps, init_p, zkeys, window):
    """Sequential pair updates to a pairwise stable network (degree statistics).

    utab_s : (K,K,S,S) systematic utilities divided by sigma_n
    eps    : (n,n) raw shocks;  mcs: (n,) marginal costs divided by sigma_n
    zkeys  : (n,n) zobrist keys for cycle detection
    Returns (adjacency uint8, status, sweeps).
    """
    n = mcs.shape[0]
    np.random.seed(seed)
    m = n * (n - 1) // 2
    pi = np.empty(m, np.int64)
    pj = np.empty(m, np.int64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            pi[k] = i
            pj[k] = j
            k += 1

    adj = np.zeros((n, n), np.uint8)
    deg = np.zeros(n, np.int64)
    h = np.int64(0)
    for k in range(m):
        if np.random.random() < init_p:
            i, j = pi[k], pj[k]
            adj[i, j] = 1
            adj[j, i] = 1
            deg[i] += 1
            deg[j] += 1
            h ^= zkeys[i, j]

    hist = np.zeros(window, np.int64)
    hist[0] = h
    nhist = 1

    perm = np.arange(m)
    for sweep in range(1, max_sweeps + 1):
        # Fisher-Yates re-randomized visiting order
        for t in range(m - 1, 0, -1):
            r = np.random.randint(0, t + 1)
            tmp = perm[t]
            perm[t] = perm[r]
            perm[r] = tmp
        changed = False
        for idx in range(m):
            p = perm[idx]
            i, j = pi[p], pj[p]
            has = adj[i, j]
            si = deg[i] + 1 - has
            sj = deg[j] + 1 - has
            if si > cap:
                si = cap
            if sj > cap:
                sj = cap
            ok_ij = eps[i, j] + utab_s[xi[i], xi[j], si, sj] >= mcs[i]
            ok_ji = eps[j, i] + utab_s[xi[j], xi[i], sj, si] >= mcs[j]
            new = 1 if (ok_ij and ok_ji) else 0
            if new != has:
                adj[i, j] = new
                adj[j, i] = new
                if new == 1:
                    deg[i] += 1
                    deg[j] += 1
                else:
                    deg[i] -= 1
                    deg[j] -= 1
                h ^= zkeys[i, j]
                changed = True
        if not changed:
            return adj, STATUS_CONVERGED, sweep
        for t in range(nhist):
            if hist[t] == h:
                return adj, STATUS_CYCLE, sweep
        if nhist < window:
            hist[nhist] = h
            nhist += 1
        else:
            for t in range(window - 1):
                hist[t] = hist[t + 1]
            hist[window - 1] = h
    return adj, STATUS_MAXSWEEPS, max_sweeps


@njit(cache=True)
def pre_network_counts(eps, mcs, ubar_s):
    """Count mutually pre-available ordered pairs (diagnostic)."""
    n = mcs.shape[0]
    total = 0
    for i in range(n):
        for j in range(n):
            if i != j:
                if eps[i, j] + ubar_s >= mcs[i] and eps[j, i] + ubar_s >= mcs[j]:
                    total += 1
    return total
