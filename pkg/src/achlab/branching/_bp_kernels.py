"""Compiled sampler for root-component sizes of the exploration branching process.

Trees are generated in compact form: a component of size ``c`` receives
``Poisson(c * t)`` tuples for each slot, and every other slot of such a tuple
opens a fresh component with size drawn from the seed distribution.  Each
tuple carries a uniform arrival time on ``[0, t_max]``; by Poisson thinning
the tuples whose own time and all ancestors' times are at most ``t`` form a
sample of the process at time ``t``.  Replaying the surviving tuples in
arrival order is a uniformly random order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .. import _kernels as K


@njit(cache=True)
def _draw_size(support, cdf):
    u = np.random.random() * cdf[-1]
    i = np.searchsorted(cdf, u, side="right")
    if i >= support.shape[0]:
        i = support.shape[0] - 1
    return support[i]


@njit(cache=True)
def _replay(comp_size, ncomp, tup, tup_eff, order, ntup, t, code, p1, ell, parent, size, sz, roots):
    for c in range(ncomp):
        parent[c] = c
        size[c] = comp_size[c]
    for q in range(ntup):
        r = order[q]
        if tup_eff[r] > t:
            continue
        for a in range(ell):
            root = K.find(parent, tup[r, a])
            roots[a] = root
            sz[a] = size[root]
        if code == K.JOIN_ALL:
            for a in range(ell):
                for b in range(a + 1, ell):
                    ra = K.find(parent, roots[a])
                    rb = K.find(parent, roots[b])
                    if ra != rb:
                        if size[ra] < size[rb]:
                            ra, rb = rb, ra
                        parent[rb] = ra
                        size[ra] += size[rb]
        else:
            a, b = K.choose_pair(code, p1, sz, ell, 0, 0)
            ra = roots[a]
            rb = roots[b]
            if ra != rb:
                if size[ra] < size[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]
    return size[K.find(parent, 0)]


@njit(cache=True)
def replay_compact(comp_size, tup, order, code, p1):
    """Replay ``tup[order]`` (all tuples present) and return the root component size."""
    ncomp = comp_size.shape[0]
    ntup = tup.shape[0]
    ell = tup.shape[1]
    eff = np.zeros(ntup)
    parent = np.empty(ncomp, np.int64)
    size = np.empty(ncomp, np.int64)
    sz = np.empty(ell, np.int64)
    roots = np.empty(ell, np.int64)
    return _replay(comp_size, ncomp, tup, eff, order, ntup, 0.0, code, p1, ell, parent, size, sz, roots)


@njit(cache=True)
def sample_root_sizes(support, cdf, grid, ell, cap, code, p1, nsamples, seed, out):
    """Fill ``out[s, g]`` with the root component size at time ``grid[g]``.

    ``grid`` must be sorted ascending; truncated samples get -1 in every
    column.  Returns the number of truncated samples.
    """
    np.random.seed(seed)
    t_max = grid[grid.shape[0] - 1]
    room = cap + ell + 2
    comp_size = np.empty(room, np.int64)
    comp_eff = np.empty(room)
    tup = np.empty((room, ell), np.int64)
    tup_time = np.empty(room)
    tup_eff = np.empty(room)
    parent = np.empty(room, np.int64)
    size = np.empty(room, np.int64)
    sz = np.empty(ell, np.int64)
    roots = np.empty(ell, np.int64)
    n_trunc = 0
    for s in range(nsamples):
        comp_size[0] = _draw_size(support, cdf)
        comp_eff[0] = 0.0
        ncomp = 1
        ntup = 0
        total = comp_size[0]
        truncated = total > cap
        head = 0
        while head < ncomp and not truncated:
            c = head
            head += 1
            mean = comp_size[c] * t_max
            for j in range(ell):
                z = np.random.poisson(mean) if mean > 0 else 0
                for _ in range(z):
                    u = np.random.random() * t_max
                    e = u if u > comp_eff[c] else comp_eff[c]
                    tup_time[ntup] = u
                    tup_eff[ntup] = e
                    for i in range(ell):
                        if i == j:
                            tup[ntup, i] = c
                        else:
                            k = _draw_size(support, cdf)
                            comp_size[ncomp] = k
                            comp_eff[ncomp] = e
                            tup[ntup, i] = ncomp
                            ncomp += 1
                            total += k
                    ntup += 1
                    if total > cap:
                        truncated = True
                        break
                if truncated:
                    break
        if truncated:
            n_trunc += 1
            for g in range(grid.shape[0]):
                out[s, g] = -1
            continue
        order = np.argsort(tup_time[:ntup])
        for g in range(grid.shape[0]):
            out[s, g] = _replay(comp_size, ncomp, tup, tup_eff, order, ntup, grid[g],
                                code, p1, ell, parent, size, sz, roots)
    return n_trunc
