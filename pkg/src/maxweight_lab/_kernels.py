"""Compiled inner loops of the MW-alpha simulation.

Every kernel takes the schedule matrix ``S`` (rows in tie-break order), the
exponent ``alpha``, a state ``q`` and a block of precomputed 0/1 arrivals,
and applies the slot update ``q <- max(q - sigma, 0) + a`` with ``sigma``
the first maximizer of ``sigma . q**alpha``.  Weights are accumulated in
coordinate order, as in :func:`maxweight_lab.policy.schedule_weights`.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _select(q, S, alpha, qa):
    M = q.shape[0]
    for i in range(M):
        qa[i] = q[i] ** alpha if q[i] > 0 else 0.0
    best = -1.0
    best_k = 0
    for k in range(S.shape[0]):
        w = 0.0
        for i in range(M):
            w += qa[i] * S[k, i]
        if w > best:
            best = w
            best_k = k
    return best_k


@njit(cache=True, nogil=True)
def _apply(q, S, k, a_row):
    for i in range(q.shape[0]):
        v = q[i] - S[k, i]
        if v < 0:
            v = 0
        q[i] = v + a_row[i]


@njit(cache=True, nogil=True)
def trace_kernel(q0, S, alpha, arrivals):
    n, M = arrivals.shape
    out = np.empty((n + 1, M), dtype=np.int64)
    q = q0.copy()
    qa = np.empty(M)
    out[0] = q
    for t in range(n):
        k = _select(q, S, alpha, qa)
        _apply(q, S, k, arrivals[t])
        out[t + 1] = q
    return out


@njit(cache=True, nogil=True)
def stats_kernel(q, S, alpha, arrivals, p):
    """Advance ``q`` in place; return ``||Q(t)||_1`` and ``||Q(t)||_p`` before each slot."""
    n, M = arrivals.shape
    l1 = np.empty(n, dtype=np.int64)
    norm = np.empty(n)
    qa = np.empty(M)
    inv = 1.0 / p
    for t in range(n):
        s1 = 0
        sp = 0.0
        for i in range(M):
            s1 += q[i]
            if q[i] > 0:
                sp += float(q[i]) ** p
        l1[t] = s1
        if p == 2.0:
            norm[t] = np.sqrt(sp)
        else:
            norm[t] = sp ** inv
        k = _select(q, S, alpha, qa)
        _apply(q, S, k, arrivals[t])
    return l1, norm


@njit(cache=True, nogil=True)
def max_kernel(q, S, alpha, arrivals):
    """Largest single-queue backlog over ``Q(0), ..., Q(n)``; advances ``q`` in place."""
    n, M = arrivals.shape
    qa = np.empty(M)
    best = 0
    for i in range(M):
        if q[i] > best:
            best = q[i]
    for t in range(n):
        k = _select(q, S, alpha, qa)
        _apply(q, S, k, arrivals[t])
        for i in range(M):
            if q[i] > best:
                best = q[i]
    return best
