"""Incremental component statistics for an edge-only graph process.

Vertices are ``0..n-1``.  Only component structure is stored (no adjacency):
a disjoint-set forest plus per-component vertex and edge counts, a histogram
of component sizes, the running sum of squared sizes and the largest size.
All of these are updated in O(1) amortized time per added edge.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _kernels as K


class MergeOutcome(NamedTuple):
    """Result of :meth:`ComponentForest.add_edge`.

    ``kind`` is ``"merged"`` (two components joined, sizes ``c_u``/``c_v``),
    ``"internal"`` (both ends already connected; ``c_u == c_v`` is the
    component size) or ``"duplicate"`` (pair already present in simple mode;
    nothing changed).
    """

    kind: str
    c_u: int
    c_v: int

    @property
    def merged(self) -> bool:
        return self.kind == "merged"


class CycleCensus(NamedTuple):
    """Vertices by component excess ``edges - (size - 1)``.

    ``unicyclic_vertices`` and ``complex_small_count`` only look at components
    of size at most ``U``; ``tree_vertices`` and ``complex_vertices`` cover
    every component.
    """

    U: int
    tree_vertices: int
    unicyclic_vertices: int
    complex_vertices: int
    complex_small_count: int


@dataclass(frozen=True)
class ForestStats:
    n: int
    sum_sq: int
    l1: int
    n_components: int
    size_hist: dict[int, int]
    _keys: list[int] = field(init=False, repr=False, compare=False)
    _suffix: list[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        keys = sorted(self.size_hist)
        suffix = [0] * (len(keys) + 1)
        for i in range(len(keys) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + keys[i] * self.size_hist[keys[i]]
        object.__setattr__(self, "_keys", keys)
        object.__setattr__(self, "_suffix", suffix)

    @property
    def susceptibility(self) -> Fraction:
        return Fraction(self.sum_sq, self.n)

    @property
    def S(self) -> float:
        return self.sum_sq / self.n

    def n_k(self, k: int) -> int:
        """Number of vertices in components of size exactly ``k``."""
        return k * self.size_hist.get(k, 0)

    def n_geq(self, k: int) -> int:
        """Number of vertices in components of size at least ``k``."""
        return self._suffix[bisect_left(self._keys, k)]

    def vertex_hist(self) -> dict[int, int]:
        """Sparse ``{k: N_k}``."""
        return {k: k * self.size_hist[k] for k in self._keys}


class ComponentForest:
    """Disjoint-set forest over ``n`` vertices with exact component statistics.

    With ``simple=True`` a repeated vertex pair is ignored instead of being
    added as a parallel edge.
    """

    def __init__(self, n: int, simple: bool = False):
        n = int(n)
        if n < 1:
            raise ValueError(f"need at least one vertex, got n={n}")
        self.n = n
        self.simple = simple
        self._parent = np.arange(n, dtype=np.int64)
        self._size = np.ones(n, dtype=np.int64)
        self._edges = np.zeros(n, dtype=np.int64)
        self._hist = np.zeros(n + 1, dtype=np.int64)
        self._hist[1] = n
        self._acc = np.array([n, 1, n], dtype=np.int64)
        self._pairs: set[tuple[int, int]] | None = set() if simple else None

    def copy(self) -> ComponentForest:
        other = object.__new__(ComponentForest)
        other.n = self.n
        other.simple = self.simple
        other._parent = self._parent.copy()
        other._size = self._size.copy()
        other._edges = self._edges.copy()
        other._hist = self._hist.copy()
        other._acc = self._acc.copy()
        other._pairs = None if self._pairs is None else set(self._pairs)
        return other

    def _check(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} out of range for n={self.n}")
        return v

    def find(self, v: int) -> int:
        return int(K.find(self._parent, self._check(v)))

    def component_size(self, v: int) -> int:
        return int(self._size[self.find(v)])

    def component_edges(self, v: int) -> int:
        return int(self._edges[self.find(v)])

    def same_component(self, u: int, v: int) -> bool:
        return self.find(u) == self.find(v)

    def add_edge(self, u: int, v: int) -> MergeOutcome:
        u, v = self._check(u), self._check(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if self._pairs is not None:
            pair = (u, v) if u < v else (v, u)
            if pair in self._pairs:
                c = self.component_size(u)
                return MergeOutcome("duplicate", c, c)
            self._pairs.add(pair)
        cu, cv = K.add_edge(self._parent, self._size, self._edges, self._hist, self._acc, u, v)
        if cv == 0:
            return MergeOutcome("internal", int(cu), int(cu))
        return MergeOutcome("merged", int(cu), int(cv))

    @property
    def sum_sq(self) -> int:
        return int(self._acc[K.SUM_SQ])

    @property
    def l1(self) -> int:
        return int(self._acc[K.L1])

    @property
    def n_components(self) -> int:
        return int(self._acc[K.NCOMP])

    @property
    def S(self) -> float:
        return self.sum_sq / self.n

    @property
    def susceptibility(self) -> Fraction:
        return Fraction(self.sum_sq, self.n)

    def size_hist(self) -> dict[int, int]:
        """Sparse ``{k: number of components of size k}``."""
        ks = np.flatnonzero(self._hist)
        return dict(zip(ks.tolist(), self._hist[ks].tolist()))

    def stats(self) -> ForestStats:
        return ForestStats(self.n, self.sum_sq, self.l1, self.n_components, self.size_hist())

    def roots(self) -> np.ndarray:
        idx = np.arange(self.n, dtype=np.int64)
        return idx[self._parent == idx]

    def labels(self) -> np.ndarray:
        """Root of every vertex (fully compresses the forest)."""
        return K.labels(self._parent)

    def components(self) -> list[np.ndarray]:
        lab = self.labels()
        order = np.argsort(lab, kind="stable")
        cuts = np.flatnonzero(np.diff(lab[order])) + 1
        return np.split(order, cuts)

    def cycle_census(self, U: int) -> CycleCensus:
        U = int(U)
        if U < 1:
            raise ValueError(f"U must be >= 1, got {U}")
        roots = self.roots()
        c = self._size[roots]
        excess = self._edges[roots] - (c - 1)
        small = c <= U
        return CycleCensus(
            U=U,
            tree_vertices=int(c[excess == 0].sum()),
            unicyclic_vertices=int(c[(excess == 1) & small].sum()),
            complex_vertices=int(c[excess >= 2].sum()),
            complex_small_count=int(np.count_nonzero((excess >= 2) & small)),
        )

    def __repr__(self) -> str:
        return f"ComponentForest(n={self.n}, components={self.n_components}, S={self.S:.4g}, L1={self.l1})"
