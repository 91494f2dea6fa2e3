"""Edge-selection rules for l-vertex processes.

Each step draws ``ell`` vertices; a rule sees the sizes of their components
(and which of them share a component) and returns the index pairs to join.
Indices are 0-based.

Size rules are handed a :class:`SizeView` only, so they cannot depend on the
step counter, ``n`` or the susceptibility.  Rules that need those (the
delayed-switch rules, graph-aware take-it-or-leave-it wrappers) are flagged
``size_rule=False`` and receive the full :class:`RuleContext`.

Rule strings look like ``"product"``, ``"r_sum:r=3"`` or ``"bounded:B=2"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K

Pair = tuple[int, int]


class RuleError(ValueError):
    pass


class SizeView(NamedTuple):
    sizes: tuple[int, ...]
    same_component: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class RuleContext:
    ell: int
    sizes: tuple[int, ...]
    same_component: tuple[tuple[int, ...], ...]
    step_index: int = 0
    n: int = 0
    susceptibility: float = 1.0

    def __post_init__(self) -> None:
        if len(self.sizes) != self.ell:
            raise RuleError(f"expected {self.ell} sizes, got {len(self.sizes)}")
        if any(c < 1 for c in self.sizes):
            raise RuleError(f"component sizes must be >= 1: {self.sizes}")
        seen = sorted(i for group in self.same_component for i in group)
        if seen != list(range(self.ell)):
            raise RuleError(f"same_component must partition 0..{self.ell - 1}: {self.same_component}")
        for group in self.same_component:
            if len({self.sizes[i] for i in group}) != 1:
                raise RuleError(f"indices {group} share a component but report different sizes")

    @property
    def all_distinct(self) -> bool:
        return len(self.same_component) == self.ell

    def size_view(self) -> SizeView:
        return SizeView(self.sizes, self.same_component)

    @classmethod
    def from_roots(cls, roots: Sequence[int], sizes: Sequence[int], **extra: Any) -> RuleContext:
        """Build a context from component identifiers of the drawn vertices."""
        groups: dict[int, list[int]] = {}
        for i, r in enumerate(roots):
            groups.setdefault(int(r), []).append(i)
        partition = tuple(tuple(g) for g in sorted(groups.values()))
        return cls(len(roots), tuple(int(c) for c in sizes), partition, **extra)


@dataclass(frozen=True)
class RuleDecision:
    pairs: tuple[Pair, ...]

    def __post_init__(self) -> None:
        norm = []
        for a, b in self.pairs:
            a, b = int(a), int(b)
            if a == b:
                raise RuleError(f"pair ({a}, {b}) joins an index to itself")
            norm.append((a, b) if a < b else (b, a))
        if len(set(norm)) != len(norm):
            raise RuleError(f"repeated pair in decision {self.pairs}")
        object.__setattr__(self, "pairs", tuple(norm))

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class RuleSpec:
    """An immutable, shareable rule description.

    ``chooser`` is called as ``chooser(view, rng)`` for size rules (``view`` a
    :class:`SizeView`) and ``chooser(ctx, rng)`` otherwise; it returns an
    iterable of index pairs.  ``kernel`` is ``(code, param)`` when a compiled
    equivalent exists.
    """

    name: str
    ell: int
    chooser: Callable[..., Any] = field(compare=False, repr=False)
    params: tuple[tuple[str, Any], ...] = ()
    size_rule: bool = True
    acyclic: bool = True
    randomized: bool = False
    kernel: tuple[int, int] | None = None

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v}" for k, v in self.params)

    def param(self, key: str) -> Any:
        return dict(self.params)[key]


def validate_acyclic(decision: RuleDecision | Sequence[Pair], ell: int) -> bool:
    """True iff the pairs form a forest on ``0..ell-1``."""
    parent = list(range(ell))

    def root(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in decision:
        ra, rb = root(a), root(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def decide(rule: RuleSpec, ctx: RuleContext, rng: np.random.Generator | None = None) -> RuleDecision:
    if ctx.ell != rule.ell:
        raise RuleError(f"rule {rule.label} needs ell={rule.ell}, context has ell={ctx.ell}")
    if rule.randomized and rng is None:
        raise RuleError(f"rule {rule.label} is randomized and needs an rng")
    arg = ctx.size_view() if rule.size_rule else ctx
    decision = RuleDecision(tuple(rule.chooser(arg, rng)))
    for a, b in decision:
        if not (0 <= a < ctx.ell and 0 <= b < ctx.ell):
            raise RuleError(f"rule {rule.label} chose pair ({a}, {b}) outside 0..{ctx.ell - 1}")
    if not decision.pairs and ctx.all_distinct:
        raise RuleError(f"rule {rule.label} chose no edge although all {ctx.ell} vertices are in distinct components")
    if rule.acyclic and not validate_acyclic(decision, ctx.ell):
        raise RuleError(f"rule {rule.label} is flagged acyclic but chose {decision.pairs}")
    return decision


# -- choosers ---------------------------------------------------------------

def _candidate(sizes: Sequence[int], r: int, key: Callable[[int, int], int], maximize: bool) -> Pair:
    best, best_key = 0, key(sizes[0], sizes[1])
    for j in range(1, r):
        k = key(sizes[2 * j], sizes[2 * j + 1])
        if (k > best_key) if maximize else (k < best_key):
            best, best_key = j, k
    return (2 * best, 2 * best + 1)


def _two_smallest(sizes: Sequence[int]) -> Pair:
    a, b = sorted(range(len(sizes)), key=lambda i: (sizes[i], i))[:2]
    return (a, b) if a < b else (b, a)


def _add(x: int, y: int) -> int:
    return x + y


def _mul(x: int, y: int) -> int:
    return x * y


# -- constructors -------------------------------------------------------------

def er() -> RuleSpec:
    return RuleSpec("er", 2, lambda view, rng: [(0, 1)], kernel=(K.ER, 0))


def _candidate_rule(name: str, r: int, key, maximize: bool, code: int) -> RuleSpec:
    r = _positive_int("r", r)
    if r == 1:
        chooser = lambda view, rng: [(0, 1)]  # noqa: E731
    else:
        chooser = lambda view, rng: [_candidate(view.sizes, r, key, maximize)]  # noqa: E731
    return RuleSpec(name, 2 * r, chooser, params=(("r", r),), kernel=(code, r))


def sum_rule(r: int = 2) -> RuleSpec:
    """Offer ``r`` candidate edges ``v1v2, v3v4, ...``; add the one with the smallest size sum."""
    return _candidate_rule("sum", r, _add, False, K.SUM_MIN)


def product_rule(r: int = 2) -> RuleSpec:
    """Like :func:`sum_rule` but minimizing the product of the endpoint sizes."""
    return _candidate_rule("product", r, _mul, False, K.PRODUCT_MIN)


def reverse_sum_rule(r: int = 2) -> RuleSpec:
    return _candidate_rule("reverse_sum", r, _add, True, K.SUM_MAX)


def reverse_product_rule(r: int = 2) -> RuleSpec:
    return _candidate_rule("reverse_product", r, _mul, True, K.PRODUCT_MAX)


def r_sum_rule(r: int) -> RuleSpec:
    """The 2r-vertex rule joining ``v_{2j-1}v_{2j}`` for the smallest-sum ``j``."""
    rule = _candidate_rule("r_sum", r, _add, False, K.SUM_MIN)
    return rule


def bounded_rule(B: int = 1) -> RuleSpec:
    """Bohman-Frieze style: take ``v1v2`` if both sizes are at most ``B``, else ``v3v4``."""
    B = _positive_int("B", B)

    def chooser(view, rng):
        c = view.sizes
        return [(0, 1)] if c[0] <= B and c[1] <= B else [(2, 3)]

    return RuleSpec("bounded", 4, chooser, params=(("B", B),), kernel=(K.BOUNDED, B))


def take_it_or_leave_it(predicate: Callable[..., bool], *, size_only: bool = True,
                        name: str = "tiol", params: tuple = ()) -> RuleSpec:
    """Take the first offered edge ``v1v2`` iff ``predicate`` accepts it, else ``v3v4``.

    With ``size_only`` the predicate is called as ``predicate(c1, c2)``;
    otherwise it receives the whole :class:`RuleContext` (and the result is
    not a size rule).
    """
    if size_only:
        def chooser(view, rng):
            return [(0, 1)] if predicate(view.sizes[0], view.sizes[1]) else [(2, 3)]
    else:
        def chooser(ctx, rng):
            return [(0, 1)] if predicate(ctx) else [(2, 3)]
    return RuleSpec(name, 4, chooser, params=params, size_rule=size_only)


def tiol_product_rule(K_max: int) -> RuleSpec:
    """Take-it-or-leave-it rule accepting ``v1v2`` iff ``c1*c2 <= K``."""
    K_max = _positive_int("K", K_max)
    rule = take_it_or_leave_it(lambda a, b: a * b <= K_max, params=(("K", K_max),))
    return RuleSpec(rule.name, 4, rule.chooser, params=rule.params, kernel=(K.TIOL_PRODUCT, K_max))


def min_rule(ell: int = 4) -> RuleSpec:
    """Join the two drawn vertices with the smallest component sizes."""
    ell = _ell(ell)
    return RuleSpec("min_rule", ell, lambda view, rng: [_two_smallest(view.sizes)],
                    params=(("ell", ell),), kernel=(K.MIN_RULE, 0))


def join_all(ell: int = 2) -> RuleSpec:
    """Join every pair of drawn vertices."""
    ell = _ell(ell)
    pairs = list(combinations(range(ell), 2))
    return RuleSpec("join_all", ell, lambda view, rng: pairs, params=(("ell", ell),),
                    acyclic=ell == 2, kernel=(K.JOIN_ALL, 0))


def delayed_r_sum(r: int = 3) -> RuleSpec:
    """Erdos-Renyi (``v1v2``) for steps ``i <= n/2``, then the r-sum rule."""
    r = _positive_int("r", r)

    def chooser(ctx, rng):
        if ctx.step_index <= ctx.n // 2:
            return [(0, 1)]
        return [_candidate(ctx.sizes, r, _add, False)]

    return RuleSpec("d_r", 2 * r, chooser, params=(("r", r),), size_rule=False,
                    kernel=(K.DELAYED_SUM, r))


def delayed_min(ell: int = 4) -> RuleSpec:
    """Erdos-Renyi for steps ``i <= n/2``, then :func:`min_rule`."""
    ell = _ell(ell)

    def chooser(ctx, rng):
        if ctx.step_index <= ctx.n // 2:
            return [(0, 1)]
        return [_two_smallest(ctx.sizes)]

    return RuleSpec("c_ell", ell, chooser, params=(("ell", ell),), size_rule=False,
                    kernel=(K.DELAYED_MIN, 0))


def custom_rule(name: str, ell: int, chooser: Callable[..., Any], *, size_rule: bool = True,
                acyclic: bool = True, randomized: bool = False) -> RuleSpec:
    return RuleSpec(name, _ell(ell), chooser, size_rule=size_rule, acyclic=acyclic,
                    randomized=randomized)


def _positive_int(key: str, value: Any) -> int:
    try:
        v = int(value)
    except (TypeError, ValueError):
        raise RuleError(f"{key} must be an integer, got {value!r}") from None
    if v < 1 or v != float(value):
        raise RuleError(f"{key} must be a positive integer, got {value!r}")
    return v


def _ell(value: Any) -> int:
    v = _positive_int("ell", value)
    if v < 2:
        raise RuleError(f"ell must be >= 2, got {v}")
    return v


_BUILTINS: dict[str, tuple[Callable[..., RuleSpec], dict[str, Any]]] = {
    "er": (er, {}),
    "sum": (sum_rule, {"r": 2}),
    "product": (product_rule, {"r": 2}),
    "reverse_sum": (reverse_sum_rule, {"r": 2}),
    "reverse_product": (reverse_product_rule, {"r": 2}),
    "r_sum": (r_sum_rule, {"r": None}),
    "bounded": (bounded_rule, {"B": 1}),
    "bohman_frieze": (bounded_rule, {"B": 1}),
    "tiol": (tiol_product_rule, {"K": None}),
    "min_rule": (min_rule, {"ell": 4}),
    "join_all": (join_all, {"ell": 2}),
    "d_r": (delayed_r_sum, {"r": 3}),
    "c_ell": (delayed_min, {"ell": 4}),
}

_PARAM_ALIASES = {"K": "K_max"}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str, **params: Any) -> RuleSpec:
    try:
        factory, defaults = _BUILTINS[name]
    except KeyError:
        raise RuleError(f"unknown rule {name!r}; known: {', '.join(BUILTIN_NAMES)}") from None
    unknown = set(params) - set(defaults)
    if unknown:
        raise RuleError(f"rule {name!r} takes {sorted(defaults) or 'no'} parameters, got {sorted(unknown)}")
    merged = {**defaults, **params}
    missing = [k for k, v in merged.items() if v is None]
    if missing:
        raise RuleError(f"rule {name!r} needs parameter(s) {missing}")
    return factory(**{_PARAM_ALIASES.get(k, k): v for k, v in merged.items()})


def parse_rule(text: str) -> RuleSpec:
    """Resolve ``"name"`` or ``"name:key=value,key=value"``."""
    name, _, rest = text.strip().partition(":")
    params: dict[str, Any] = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip():
                raise RuleError(f"malformed rule parameter {item!r} in {text!r}")
            params[key.strip()] = value.strip()
    return builtin(name.strip(), **params)


def resolve(rule: RuleSpec | str) -> RuleSpec:
    return rule if isinstance(rule, RuleSpec) else parse_rule(rule)


def size_rule_builtins(ell: int) -> list[RuleSpec]:
    """Every built-in size rule instantiated at arity ``ell`` (2 or an even number for pair rules)."""
    out = [min_rule(ell), join_all(ell)]
    if ell % 2 == 0:
        r = ell // 2
        out += [sum_rule(r), product_rule(r), reverse_sum_rule(r), reverse_product_rule(r), r_sum_rule(r)]
    if ell == 2:
        out.insert(0, er())
    if ell == 4:
        out += [bounded_rule(1), tiol_product_rule(4)]
    return out
