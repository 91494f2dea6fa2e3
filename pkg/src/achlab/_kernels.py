"""Compiled inner loops shared by the forest, the process engine and the rules.

Forest state lives in plain arrays so the same buffers can be driven either
one edge at a time from Python or in bulk by :func:`run_steps`:

``parent``/``size``/``edges`` are per-vertex (only meaningful at roots),
``hist[k]`` counts components of size ``k``, and ``acc`` holds
``[sum of squared sizes, largest size, number of components]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Rule codes understood by the compiled paths.  Keep in sync with rules.py.
ER = 0
SUM_MIN = 1
PRODUCT_MIN = 2
SUM_MAX = 3
PRODUCT_MAX = 4
BOUNDED = 5
TIOL_PRODUCT = 6
MIN_RULE = 7
JOIN_ALL = 8
DELAYED_SUM = 9
DELAYED_MIN = 10

SIZE_RULE_CODES = frozenset(range(0, 9))

SUM_SQ = 0
L1 = 1
NCOMP = 2


@njit(cache=True)
def find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def union_roots(parent, size, edges, hist, acc, ru, rv):
    """Add one edge between the components rooted at ``ru`` and ``rv``.

    Returns ``(c_u, c_v)``; ``c_v == 0`` flags an internal edge.
    """
    cu = size[ru]
    if ru == rv:
        edges[ru] += 1
        return cu, 0
    cv = size[rv]
    if cu >= cv:
        big, small = ru, rv
    else:
        big, small = rv, ru
    merged = cu + cv
    parent[small] = big
    size[big] = merged
    edges[big] += edges[small] + 1
    hist[cu] -= 1
    hist[cv] -= 1
    hist[merged] += 1
    acc[SUM_SQ] += 2 * cu * cv
    if merged > acc[L1]:
        acc[L1] = merged
    acc[NCOMP] -= 1
    return cu, cv


@njit(cache=True)
def add_edge(parent, size, edges, hist, acc, u, v):
    return union_roots(parent, size, edges, hist, acc, find(parent, u), find(parent, v))


@njit(cache=True)
def labels(parent):
    out = np.empty(parent.shape[0], np.int64)
    for v in range(parent.shape[0]):
        out[v] = find(parent, v)
    return out


@njit(cache=True)
def _pair_key(code, a, b):
    if code == SUM_MIN or code == SUM_MAX or code == DELAYED_SUM:
        return a + b
    return a * b


@njit(cache=True)
def _best_candidate(code, sz, r):
    maximize = code == SUM_MAX or code == PRODUCT_MAX
    best = 0
    best_key = _pair_key(code, sz[0], sz[1])
    for j in range(1, r):
        key = _pair_key(code, sz[2 * j], sz[2 * j + 1])
        if (maximize and key > best_key) or (not maximize and key < best_key):
            best = j
            best_key = key
    return 2 * best, 2 * best + 1


@njit(cache=True)
def _two_smallest(sz, ell):
    a = 0
    for j in range(1, ell):
        if sz[j] < sz[a]:
            a = j
    b = -1
    for j in range(ell):
        if j != a and (b < 0 or sz[j] < sz[b]):
            b = j
    if a < b:
        return a, b
    return b, a


@njit(cache=True)
def choose_pair(code, p1, sz, ell, step, n):
    """Single-pair decision of a built-in rule (indices are 0-based)."""
    if code == ER:
        return 0, 1
    if code == SUM_MIN or code == PRODUCT_MIN or code == SUM_MAX or code == PRODUCT_MAX:
        return _best_candidate(code, sz, p1)
    if code == BOUNDED:
        if sz[0] <= p1 and sz[1] <= p1:
            return 0, 1
        return 2, 3
    if code == TIOL_PRODUCT:
        if sz[0] * sz[1] <= p1:
            return 0, 1
        return 2, 3
    if code == MIN_RULE:
        return _two_smallest(sz, ell)
    if code == DELAYED_SUM:
        if step <= n // 2:
            return 0, 1
        return _best_candidate(code, sz, p1)
    if code == DELAYED_MIN:
        if step <= n // 2:
            return 0, 1
        return _two_smallest(sz, ell)
    return -1, -1


@njit(cache=True)
def run_steps(parent, size, edges, hist, acc, tuples, lo, hi, code, p1, step0, n):
    """Apply steps ``lo..hi-1`` of a built-in rule; ``step0`` steps are already done."""
    ell = tuples.shape[1]
    sz = np.empty(ell, np.int64)
    roots = np.empty(ell, np.int64)
    for i in range(lo, hi):
        for j in range(ell):
            r = find(parent, tuples[i, j])
            roots[j] = r
            sz[j] = size[r]
        if code == JOIN_ALL:
            for a in range(ell):
                for b in range(a + 1, ell):
                    if tuples[i, a] != tuples[i, b]:
                        union_roots(parent, size, edges, hist, acc,
                                    find(parent, tuples[i, a]), find(parent, tuples[i, b]))
        else:
            step = step0 + (i - lo) + 1
            a, b = choose_pair(code, p1, sz, ell, step, n)
            # a pair drawn twice is a loop: no edge
            if tuples[i, a] != tuples[i, b]:
                union_roots(parent, size, edges, hist, acc, roots[a], roots[b])


@njit(cache=True)
def fix_repeats(tuples, n, draws):
    """Redraw entries so every row holds distinct vertices.

    ``draws`` is a pool of uniform integers in ``[0, n)`` consumed in order;
    returns how many were used, or -1 if the pool ran out.
    """
    used = 0
    ell = tuples.shape[1]
    for i in range(tuples.shape[0]):
        for j in range(1, ell):
            clash = True
            while clash:
                clash = False
                for k in range(j):
                    if tuples[i, k] == tuples[i, j]:
                        clash = True
                        break
                if clash:
                    if used >= draws.shape[0]:
                        return -1
                    tuples[i, j] = draws[used]
                    used += 1
    return used
