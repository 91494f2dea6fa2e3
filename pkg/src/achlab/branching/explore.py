"""Exploration trees of a finite graph: a seed forest plus a multiset of tuples.

The graph ``H`` joins every tuple's vertices on top of the seed forest
``F``.  Exploring from ``v`` adds ``C_v(F)`` as vertex nodes, then for each
vertex node ``w`` and slot ``j`` tests all untested tuples with ``w`` in slot
``j`` (the set ``S_{j,w}``) and opens the ``F``-components of their other
slots.  Components whose vertex was already reached get no children.  Each
``S_{j,w}`` is flagged with the reasons, if any, that would prevent the tree
from determining the tuples and component sizes it met.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..forest import ComponentForest
from .tree import COMPONENT, INDEX, ROOT, TUPLE, VERTEX, ExplorationTree

DUPLICATE = 1
REACHED = 2
SAME_COMPONENT = 4
SHARED_COMPONENT = 8
BAD_REASONS = {DUPLICATE: "duplicate tuple", REACHED: "slot already reached",
               SAME_COMPONENT: "two slots in one component", SHARED_COMPONENT: "tuples share a component"}


@njit(cache=True)
def _bad_mask(srows, ns, j, tuples, cid, reached):
    ell = tuples.shape[1]
    mask = 0
    for a in range(ns):
        r = srows[a]
        for i in range(ell):
            if i != j and reached[tuples[r, i]]:
                mask |= REACHED
            for k in range(i + 1, ell):
                if cid[tuples[r, i]] == cid[tuples[r, k]]:
                    mask |= SAME_COMPONENT
        for b in range(a + 1, ns):
            q = srows[b]
            same = True
            for i in range(ell):
                if tuples[r, i] != tuples[q, i]:
                    same = False
                    break
            if same:
                mask |= DUPLICATE
            for i in range(ell):
                if i == j:
                    continue
                for k in range(ell):
                    if k != j and cid[tuples[r, i]] == cid[tuples[q, k]]:
                        mask |= SHARED_COMPONENT
    return mask


@njit(cache=True)
def _explore(v, tuples, cid, mem_off, members, slot_rows, slot_off, reached, tested,
             kind, ntype, parent, label, s_j, s_w, s_mask, srows, vqueue):
    """Build one tree into the node arrays; returns ``(nodes, s_records, truncated)``.

    ``reached``/``tested`` must be all False on entry and are restored on exit.
    """
    ell = tuples.shape[1]
    cap = kind.shape[0]
    nn = 0
    ns_rec = 0
    nq = 0
    kind[0] = ROOT
    ntype[0] = -1
    parent[0] = -1
    label[0] = v
    nn = 1
    c = cid[v]
    for p in range(mem_off[c], mem_off[c + 1]):
        x = members[p]
        kind[nn] = VERTEX
        ntype[nn] = -1
        parent[nn] = 0
        label[nn] = x
        reached[x] = True
        vqueue[nq] = nn
        nq += 1
        nn += 1
    truncated = False
    head = 0
    while head < nq and not truncated:
        node = vqueue[head]
        head += 1
        w = label[node]
        for j in range(ell):
            if nn + 1 > cap:
                truncated = True
                break
            idx = nn
            kind[nn] = INDEX
            ntype[nn] = j
            parent[nn] = node
            label[nn] = w
            nn += 1
            ns = 0
            for p in range(slot_off[j, w], slot_off[j, w + 1]):
                r = slot_rows[j, p]
                if not tested[r]:
                    tested[r] = True
                    srows[ns] = r
                    ns += 1
            s_j[ns_rec] = j
            s_w[ns_rec] = w
            s_mask[ns_rec] = _bad_mask(srows, ns, j, tuples, cid, reached)
            ns_rec += 1
            for a in range(ns):
                r = srows[a]
                if nn + ell > cap:
                    truncated = True
                    break
                tnode = nn
                kind[nn] = TUPLE
                ntype[nn] = -1
                parent[nn] = idx
                label[nn] = r
                nn += 1
                for i in range(ell):
                    if i == j:
                        continue
                    u = tuples[r, i]
                    cnode = nn
                    kind[nn] = COMPONENT
                    ntype[nn] = i if i < j else i - 1
                    parent[nn] = tnode
                    label[nn] = u
                    nn += 1
                    if reached[u]:
                        continue
                    cu = cid[u]
                    if nn + mem_off[cu + 1] - mem_off[cu] > cap:
                        truncated = True
                        break
                    for q in range(mem_off[cu], mem_off[cu + 1]):
                        x = members[q]
                        kind[nn] = VERTEX
                        ntype[nn] = -1
                        parent[nn] = cnode
                        label[nn] = x
                        reached[x] = True
                        vqueue[nq] = nn
                        nq += 1
                        nn += 1
                if truncated:
                    break
            if truncated:
                break
    # restore workspace
    for q in range(nq):
        reached[label[vqueue[q]]] = False
    for q in range(nn):
        if kind[q] == TUPLE:
            tested[label[q]] = False
    # rows tested but not turned into nodes (only on truncation)
    if truncated:
        tested[:] = False
    return nn, ns_rec, truncated


@njit(cache=True)
def _bad_counts(starts, tuples, cid, mem_off, members, slot_rows, slot_off, reached, tested,
                kind, ntype, parent, label, s_j, s_w, s_mask, srows, vqueue):
    bad_trees = 0
    bad_sets = 0
    sets = 0
    vertex_nodes = 0
    for s in range(starts.shape[0]):
        nn, nrec, trunc = _explore(starts[s], tuples, cid, mem_off, members, slot_rows, slot_off, reached,
                                   tested, kind, ntype, parent, label, s_j, s_w, s_mask, srows, vqueue)
        any_bad = False
        for q in range(nrec):
            if s_mask[q] != 0:
                bad_sets += 1
                any_bad = True
        sets += nrec
        if any_bad:
            bad_trees += 1
        for q in range(nn):
            if kind[q] == VERTEX:
                vertex_nodes += 1
    return bad_trees, bad_sets, sets, vertex_nodes


@dataclass(frozen=True)
class FiniteExploration:
    tree: ExplorationTree
    set_slot: np.ndarray
    set_vertex: np.ndarray
    set_mask: np.ndarray

    @property
    def vertices(self) -> np.ndarray:
        return np.sort(self.tree.vertex_labels())

    @property
    def good(self) -> bool:
        return not np.any(self.set_mask)

    def reasons(self) -> list[tuple[int, int, list[str]]]:
        """``(slot, vertex, reasons)`` for every bad set."""
        out = []
        for j, w, m in zip(self.set_slot, self.set_vertex, self.set_mask):
            if m:
                out.append((int(j), int(w), [txt for bit, txt in BAD_REASONS.items() if m & bit]))
        return out


@dataclass(frozen=True)
class BadFrequency:
    trees: int
    bad_trees: int
    sets: int
    bad_sets: int
    vertex_nodes: int

    @property
    def tree_rate(self) -> float:
        return self.bad_trees / self.trees if self.trees else 0.0

    @property
    def set_rate(self) -> float:
        return self.bad_sets / self.sets if self.sets else 0.0


class TupleIndex:
    """Seed-forest components and per-slot tuple lookup tables for repeated explorations."""

    def __init__(self, seed: ComponentForest | np.ndarray | int, tuples: np.ndarray):
        if isinstance(seed, ComponentForest):
            labels = seed.labels()
        elif np.ndim(seed) == 0:
            labels = np.arange(int(seed), dtype=np.int64)
        else:
            labels = np.asarray(seed, dtype=np.int64)
        n = labels.size
        tuples = np.ascontiguousarray(tuples, dtype=np.int64)
        if tuples.ndim != 2 or tuples.shape[1] < 2:
            raise ValueError("tuples must be an (m, ell) array with ell >= 2")
        if tuples.size and (tuples.min() < 0 or tuples.max() >= n):
            raise ValueError("tuple entries out of range")
        self.n = n
        self.ell = tuples.shape[1]
        self.tuples = tuples
        _, self.cid = np.unique(labels, return_inverse=True)
        self.cid = self.cid.astype(np.int64)
        counts = np.bincount(self.cid)
        self.mem_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.members = np.argsort(self.cid, kind="stable").astype(np.int64)
        m = tuples.shape[0]
        self.slot_rows = np.empty((self.ell, m), dtype=np.int64)
        self.slot_off = np.empty((self.ell, n + 1), dtype=np.int64)
        for j in range(self.ell):
            self.slot_rows[j] = np.argsort(tuples[:, j], kind="stable")
            self.slot_off[j] = np.concatenate([[0], np.cumsum(np.bincount(tuples[:, j], minlength=n))])
        cap = 1 + n * (self.ell + 1) + m * self.ell
        self._work = (np.zeros(n, np.bool_), np.zeros(m, np.bool_),
                      np.empty(cap, np.int8), np.empty(cap, np.int64), np.empty(cap, np.int64),
                      np.empty(cap, np.int64))
        recs = n * self.ell
        self._sets = (np.empty(recs, np.int64), np.empty(recs, np.int64), np.empty(recs, np.int64))
        self._scratch = (np.empty(max(m, 1), np.int64), np.empty(n, np.int64))

    def _args(self):
        return (self.tuples, self.cid, self.mem_off, self.members, self.slot_rows, self.slot_off,
                *self._work, *self._sets, *self._scratch)

    def explore(self, v: int) -> FiniteExploration:
        v = int(v)
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} out of range for n={self.n}")
        nn, nrec, trunc = _explore(v, *self._args())
        kind, ntype, parent, label = (a[:nn].copy() for a in self._work[2:])
        time = np.where(kind == TUPLE, label, np.nan).astype(np.float64)
        tree = ExplorationTree(self.ell, kind, ntype, parent, time, label, bool(trunc))
        sj, sw, sm = (a[:nrec].copy() for a in self._sets)
        return FiniteExploration(tree, sj, sw, sm)

    def bad_frequency(self, starts: np.ndarray) -> BadFrequency:
        starts = np.asarray(starts, dtype=np.int64)
        bt, bs, s, vn = _bad_counts(starts, *self._args())
        return BadFrequency(int(starts.size), int(bt), int(s), int(bs), int(vn))


def explore_finite(seed: ComponentForest | np.ndarray | int, tuples: np.ndarray, v: int) -> FiniteExploration:
    """Exploration tree of ``v`` in the graph joining every tuple on top of ``seed``.

    ``seed`` is the initial forest (or its component labels, or ``n`` for
    the empty graph).  Tuple nodes carry their row in ``tuples`` as label and
    as arrival time.
    """
    return TupleIndex(seed, tuples).explore(v)


def hypergraph_components(seed: ComponentForest | int, tuples: np.ndarray) -> ComponentForest:
    """Ground truth: the seed forest with every tuple's vertices joined."""
    forest = seed.copy() if isinstance(seed, ComponentForest) else ComponentForest(int(seed))
    for tup in np.asarray(tuples):
        for u in tup[1:]:
            if u != tup[0]:
                forest.add_edge(tup[0], u)
    return forest
