"""Typed exploration trees: sampling, tuple reconstruction and rule replay.

Node kinds follow the exploration of a component: the root, vertex nodes,
index nodes (one per tuple slot of a vertex), tuple nodes and component
nodes (one per other slot of a tuple).  Depths are therefore 0 for the root,
``4i+1`` for vertex nodes and ``4i+2``/``4i+3``/``4i+4`` for index, tuple and
component nodes.  Types are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rules import RuleContext, RuleError, RuleSpec, decide, resolve
from .pmf import SizePmf

ROOT, VERTEX, INDEX, TUPLE, COMPONENT = range(5)
KIND_NAMES = ("root", "vertex", "index", "tuple", "component")


@dataclass
class ExplorationTree:
    """Flat node arrays; node 0 is the root and parents precede children.

    ``time`` is the arrival time of tuple nodes (NaN elsewhere).  ``label``
    carries graph identifiers for trees explored in a finite graph (vertex
    for vertex/component/root nodes, tuple row for tuple nodes) and -1 for
    sampled trees.
    """

    ell: int
    kind: np.ndarray
    type: np.ndarray
    parent: np.ndarray
    time: np.ndarray
    label: np.ndarray
    truncated: bool = False

    def __len__(self) -> int:
        return int(self.kind.size)

    def nodes(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kind == kind)

    @property
    def n_vertex_nodes(self) -> int:
        return int(np.count_nonzero(self.kind == VERTEX))

    def child_counts(self) -> np.ndarray:
        counts = np.zeros(len(self), dtype=np.int64)
        np.add.at(counts, self.parent[1:], 1)
        return counts

    @property
    def degenerate(self) -> bool:
        """True if some component node has no vertex-node children."""
        comps = self.nodes(COMPONENT)
        return bool(comps.size and np.any(self.child_counts()[comps] == 0))

    def depths(self) -> np.ndarray:
        depth = np.zeros(len(self), dtype=np.int64)
        for i in range(1, len(self)):
            depth[i] = depth[self.parent[i]] + 1
        return depth

    def vertex_labels(self) -> np.ndarray:
        return self.label[self.kind == VERTEX]


class _Builder:
    def __init__(self, ell: int):
        self.ell = ell
        self.kind: list[int] = []
        self.type: list[int] = []
        self.parent: list[int] = []
        self.time: list[float] = []
        self.label: list[int] = []

    def add(self, kind: int, parent: int, type_: int = -1, time: float = np.nan, label: int = -1) -> int:
        self.kind.append(kind)
        self.type.append(type_)
        self.parent.append(parent)
        self.time.append(time)
        self.label.append(label)
        return len(self.kind) - 1

    def build(self, truncated: bool) -> ExplorationTree:
        return ExplorationTree(self.ell, np.array(self.kind, np.int8), np.array(self.type, np.int64),
                               np.array(self.parent, np.int64), np.array(self.time, np.float64),
                               np.array(self.label, np.int64), truncated)


def sample_bp(phi: SizePmf, t: float, ell: int, cap: int, rng: np.random.Generator) -> ExplorationTree:
    """Draw one tree of the idealized exploration branching process.

    The root has ``R ~ phi`` vertex-node children, every vertex node has
    ``ell`` index nodes, every index node ``Poisson(t)`` tuple nodes (with
    arrival times uniform on ``[0, t]``), every tuple node ``ell - 1``
    component nodes, and every component node ``R ~ phi`` vertex nodes.
    Generation stops once more than ``cap`` vertex nodes exist.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if ell < 2:
        raise ValueError(f"ell must be >= 2, got {ell}")
    b = _Builder(ell)
    b.add(ROOT, -1)
    queue: list[int] = []
    n_vertex = 0

    def spawn(parent: int) -> bool:
        nonlocal n_vertex
        for _ in range(phi.sample(rng)):
            queue.append(b.add(VERTEX, parent))
            n_vertex += 1
        return n_vertex > cap

    truncated = spawn(0)
    head = 0
    while not truncated and head < len(queue):
        v = queue[head]
        head += 1
        for j in range(ell):
            idx = b.add(INDEX, v, j)
            for _ in range(rng.poisson(t)):
                tup = b.add(TUPLE, idx, time=rng.random() * t)
                for ctype in range(ell - 1):
                    comp = b.add(COMPONENT, tup, ctype)
                    if spawn(comp):
                        truncated = True
                if truncated:
                    break
            if truncated:
                break
    return b.build(truncated)


@dataclass(frozen=True)
class Reconstruction:
    """Tuples over component ids; component 0 is the root's component."""

    tuples: np.ndarray
    sizes: np.ndarray
    times: np.ndarray
    rows: np.ndarray
    degenerate: bool


def reconstruct(tree: ExplorationTree) -> Reconstruction:
    """Recover the explored tuples and component sizes from the tree shape.

    Slot ``j`` of a tuple found under an index node of type ``j`` is the
    component of that index node's vertex node; the other slots, in
    increasing order, are the tuple's component nodes in type order.
    ``rows`` holds the tuple nodes' labels.
    """
    if tree.truncated:
        raise ValueError("cannot reconstruct a truncated tree")
    counts = tree.child_counts()
    comp_of_node = np.full(len(tree), -1, dtype=np.int64)
    comp_of_node[0] = 0
    sizes = [int(counts[0])]
    for c in tree.nodes(COMPONENT):
        comp_of_node[c] = len(sizes)
        sizes.append(int(counts[c]))
    ell = tree.ell
    tuple_nodes = tree.nodes(TUPLE)
    children: dict[int, list[int]] = {int(u): [] for u in tuple_nodes}
    for c in tree.nodes(COMPONENT):
        children[int(tree.parent[c])].append(int(c))
    out = np.empty((tuple_nodes.size, ell), dtype=np.int64)
    for row, u in enumerate(tuple_nodes):
        idx = tree.parent[u]
        j = int(tree.type[idx])
        vertex = tree.parent[idx]
        comps = sorted(children[int(u)], key=lambda c: tree.type[c])
        if len(comps) != ell - 1:
            raise ValueError(f"tuple node {u} has {len(comps)} component nodes, expected {ell - 1}")
        out[row, j] = comp_of_node[tree.parent[vertex]]
        others = [i for i in range(ell) if i != j]
        for i, c in zip(others, comps):
            out[row, i] = comp_of_node[c]
    degenerate = any(s == 0 for s in sizes[1:])
    return Reconstruction(out, np.array(sizes, np.int64), tree.time[tuple_nodes], tree.label[tuple_nodes], degenerate)


def replay(rule: RuleSpec, tuples: np.ndarray, sizes: np.ndarray, order, rng: np.random.Generator | None = None) -> int:
    """Present ``tuples[order]`` to a size rule over components of the given sizes.

    Returns the final size of component 0's merged component.
    """
    parent = list(range(len(sizes)))
    weight = [int(s) for s in sizes]

    def root(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for row in order:
        roots = [root(int(c)) for c in tuples[row]]
        ctx = RuleContext.from_roots(roots, [weight[r] for r in roots])
        for a, b in decide(rule, ctx, rng):
            ra, rb = root(roots[a]), root(roots[b])
            if ra != rb:
                parent[rb] = ra
                weight[ra] += weight[rb]
    return weight[root(0)]


def _size_rule(rule: RuleSpec | str, ell: int) -> RuleSpec:
    rule = resolve(rule)
    if not rule.size_rule:
        raise RuleError(f"rule {rule.label} is not a size rule; its decisions depend on more than component sizes")
    if rule.ell != ell:
        raise RuleError(f"rule {rule.label} needs ell={rule.ell}, tree has ell={ell}")
    return rule


def eval_component(rule: RuleSpec | str, tree: ExplorationTree, rng: np.random.Generator | None = None,
                   order: str | np.ndarray = "random") -> int:
    """Size of the root's component after replaying the tree's tuples to ``rule``.

    ``order`` is ``"random"`` (uniform, drawn from ``rng``), ``"time"``
    (increasing arrival time) or an explicit permutation of the tuple nodes.
    Degenerate trees evaluate to 0.
    """
    rule = _size_rule(rule, tree.ell)
    rec = reconstruct(tree)
    if rec.degenerate:
        return 0
    m = rec.tuples.shape[0]
    if isinstance(order, str):
        if order == "random":
            if rng is None:
                raise ValueError("random order needs an rng")
            perm = rng.permutation(m)
        elif order == "time":
            perm = np.argsort(rec.times, kind="stable")
        else:
            raise ValueError(f"unknown order {order!r}")
    else:
        perm = np.asarray(order, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(m)):
            raise ValueError("order must be a permutation of the tuple nodes")
    return replay(rule, rec.tuples, rec.sizes, perm, rng)
