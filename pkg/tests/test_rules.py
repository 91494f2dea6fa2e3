import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from achlab import ComponentForest, RuleContext, RuleDecision, RuleError, builtin, decide, parse_rule, validate_acyclic
from achlab import _kernels as K
from achlab.rules import BUILTIN_NAMES, custom_rule, size_rule_builtins, take_it_or_leave_it


def ctx(*sizes, step=0, n=0):
    return RuleContext.from_roots(list(range(len(sizes))), list(sizes), step_index=step, n=n)


def pairs(rule, *sizes, **kw):
    return decide(rule, ctx(*sizes, **kw)).pairs


def test_product_rule_takes_smaller_product():
    assert pairs(builtin("product"), 3, 4, 2, 5) == ((2, 3),)


def test_reverse_product_takes_larger_product():
    assert pairs(builtin("reverse_product"), 3, 4, 2, 5) == ((0, 1),)


def test_r_sum_three_pairs():
    assert pairs(builtin("r_sum", r=3), 5, 2, 1, 9, 3, 3) == ((4, 5),)


def test_er_and_min_rule():
    assert pairs(builtin("er"), 1, 1) == ((0, 1),)
    assert pairs(builtin("min_rule", ell=4), 7, 2, 2, 5) == ((1, 2),)


def test_ties_go_to_first_candidate():
    assert pairs(builtin("product"), 2, 3, 3, 2) == ((0, 1),)
    assert pairs(builtin("sum"), 1, 1, 1, 1) == ((0, 1),)
    assert pairs(builtin("min_rule", ell=5), 4, 4, 4, 4, 4) == ((0, 1),)


def test_delayed_rule_switches_after_half():
    rule = builtin("d_r", r=3)
    sizes = (5, 2, 1, 9, 3, 3)
    assert pairs(rule, *sizes, step=50, n=100) == ((0, 1),)
    assert pairs(rule, *sizes, step=51, n=100) == ((4, 5),)


def test_bounded_and_tiol():
    assert pairs(builtin("bounded"), 1, 1, 5, 5) == ((0, 1),)
    assert pairs(builtin("bounded"), 1, 2, 5, 5) == ((2, 3),)
    assert pairs(builtin("tiol", K=4), 2, 2, 9, 9) == ((0, 1),)
    assert pairs(builtin("tiol", K=4), 2, 3, 9, 9) == ((2, 3),)


def test_validate_acyclic_examples():
    assert validate_acyclic([(0, 1), (2, 3)], 4)
    assert not validate_acyclic([(0, 1), (1, 2), (0, 2)], 4)
    assert not validate_acyclic(list(itertools.combinations(range(4), 2)), 4)


def test_join_all_flags():
    assert builtin("join_all", ell=2).acyclic
    assert not builtin("join_all", ell=3).acyclic
    assert len(pairs(builtin("join_all", ell=4), 1, 2, 3, 4)) == 6


@pytest.mark.parametrize("text", ["nosuch", "product:r=0", "product:q=2", "r_sum", "join_all:ell=1", "product:r"])
def test_bad_rule_strings(text):
    with pytest.raises(RuleError):
        parse_rule(text)


def test_parse_round_trip_labels():
    for name in BUILTIN_NAMES:
        params = {"r_sum": {"r": 3}, "tiol": {"K": 4}}.get(name, {})
        rule = builtin(name, **params)
        assert parse_rule(rule.label) == rule


def test_decision_errors():
    with pytest.raises(RuleError):
        RuleDecision(((1, 1),))
    with pytest.raises(RuleError):
        decide(builtin("product"), ctx(1, 1))
    lazy = custom_rule("lazy", 2, lambda view, rng: [])
    with pytest.raises(RuleError):
        decide(lazy, ctx(1, 1))
    cyclic = custom_rule("tri", 3, lambda view, rng: [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(RuleError):
        decide(cyclic, ctx(1, 1, 1))


def test_randomized_rule_needs_rng():
    coin = custom_rule("coin", 4, lambda view, rng: [(0, 1)] if rng.random() < 0.5 else [(2, 3)], randomized=True)
    with pytest.raises(RuleError):
        decide(coin, ctx(1, 1, 1, 1))
    assert len(decide(coin, ctx(1, 1, 1, 1), np.random.default_rng(0))) == 1


def test_context_validation():
    with pytest.raises(RuleError):
        RuleContext(2, (1, 0), ((0,), (1,)))
    with pytest.raises(RuleError):
        RuleContext(2, (1, 2), ((0, 1),))


def test_non_size_predicate_sees_context():
    rule = take_it_or_leave_it(lambda c: c.step_index < 3, size_only=False)
    assert not rule.size_rule
    assert pairs(rule, 1, 1, 1, 1, step=2) == ((0, 1),)
    assert pairs(rule, 1, 1, 1, 1, step=3) == ((2, 3),)


sizes_and_partition = st.integers(2, 6).flatmap(lambda ell: st.lists(st.integers(0, ell - 1), min_size=ell,
                                                                     max_size=ell))


@settings(max_examples=300, deadline=None)
@given(sizes_and_partition, st.lists(st.integers(1, 30), min_size=6, max_size=6), st.integers(0, 10**6))
def test_size_rules_are_pure_and_match_kernel(roots, weights, seed):
    ell = len(roots)
    by_root = {r: weights[r] for r in roots}
    sizes = [by_root[r] for r in roots]
    context = RuleContext.from_roots(roots, sizes)
    for rule in size_rule_builtins(ell) if ell in (2, 4, 6) else [builtin("min_rule", ell=ell)]:
        first = decide(rule, context, np.random.default_rng(seed))
        again = decide(rule, context, np.random.default_rng(seed + 1))
        assert first == again
        code, p1 = rule.kernel
        sz = np.array(sizes, dtype=np.int64)
        a, b = K.choose_pair(code, p1, sz, ell, 1, 10)
        if code != K.JOIN_ALL:
            assert first.pairs == ((a, b),)


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 60), st.integers(0, 2**31), st.sampled_from(
    ["er", "product", "sum:r=3", "reverse_product", "bounded", "tiol:K=4", "min_rule:ell=5", "d_r:r=3",
     "c_ell:ell=4", "join_all:ell=3"]))
def test_kernel_and_generic_paths_agree(n, seed, text):
    from achlab import RunConfig, run

    cfg = dict(n=n, rule=text, steps=2 * n, seed=seed, snapshots=[n // 2, n])
    fast, slow = run(RunConfig(**cfg)), run(RunConfig(**cfg, use_kernel=False))
    assert fast.snapshots == slow.snapshots


def test_forest_after_rule_run_is_consistent():
    from achlab import RunConfig, run

    series = run(RunConfig(n=500, rule="product", steps=400, seed=2), keep_forest=True)
    f = series.forest
    assert isinstance(f, ComponentForest)
    assert f.sum_sq == series.final().sum_sq
