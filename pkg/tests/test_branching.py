import math

import numpy as np
import pytest

from achlab.branching import (ExplorationTree, SizePmf, StitchAborted, borel, borel_pmf, er_susceptibility,
                              estimate_rho, eval_component, reconstruct, sample_bp, stitch)
from achlab.branching.stitch import stage_length
from achlab.branching.tree import COMPONENT, INDEX, ROOT, TUPLE, VERTEX
from achlab.rules import RuleError, custom_rule, product_rule
from oracles import borel as borel_oracle


def build(ell, nodes):
    """Tree from ``(kind, parent, type, time)`` rows; node 0 is the root."""
    kind, parent, typ, time = zip(*nodes)
    return ExplorationTree(ell, np.array(kind), np.array(typ), np.array(parent), np.array(time, float),
                           np.full(len(nodes), -1))


def vertex_block(rows, parent, count):
    for _ in range(count):
        rows.append((VERTEX, parent, -1, np.nan))


# -- size laws ------------------------------------------------------------------

def test_pmf_basics_and_json():
    p = SizePmf.from_dict({1: 0.5, 3: 0.25}, remainder=0.25, tag="x")
    assert p[3] == 0.25 and p[2] == 0 and p.mass == pytest.approx(0.75)
    assert p.normalized().chi == pytest.approx((0.5 + 0.75) / 0.75)
    assert SizePmf.from_json(p.to_json()) == p
    rng = np.random.default_rng(0)
    draws = p.normalized().sample(rng, 20_000)
    assert set(np.unique(draws)) == {1, 3}
    with pytest.raises(ValueError):
        SizePmf.from_dict({0: 1.0})
    with pytest.raises(ValueError):
        SizePmf.from_dict({1: 0.7, 2: 0.7})


def test_borel_matches_independent_formula():
    for k in range(1, 15):
        assert borel_pmf(k, 0.25) == pytest.approx(borel_oracle(k, 0.25), rel=1e-12)
    assert borel_pmf(1, 0.25) == pytest.approx(math.exp(-0.5))
    assert borel_pmf(2, 0.25) == pytest.approx(0.5 * math.exp(-1))
    law = borel(0.25, 500)
    assert law.mass + law.remainder == pytest.approx(1.0)
    assert law.chi == pytest.approx(er_susceptibility(0.25), rel=1e-6)


# -- trees ----------------------------------------------------------------------

def test_zero_time_tree_is_root_plus_seed_vertices():
    rng = np.random.default_rng(1)
    tree = sample_bp(SizePmf.point_mass(3), 0.0, 2, 100, rng)
    assert tree.n_vertex_nodes == 3 and tree.nodes(TUPLE).size == 0
    rec = reconstruct(tree)
    assert rec.tuples.shape == (0, 2) and rec.sizes.tolist() == [3]
    assert eval_component("product", sample_bp(SizePmf.point_mass(5), 0.0, 4, 100, rng), order="time") == 5


def test_tree_depths_follow_node_kinds():
    tree = sample_bp(SizePmf.point_mass(1), 0.3, 3, 1000, np.random.default_rng(2))
    depth = tree.depths()
    expected = {ROOT: 0, VERTEX: 1, INDEX: 2, TUPLE: 3, COMPONENT: 0}
    for kind, offset in expected.items():
        if kind != ROOT:
            assert np.all(depth[tree.kind == kind] % 4 == offset % 4)


def test_mean_grandchildren_per_vertex_node():
    rng = np.random.default_rng(3)
    t, counts = 0.25, []
    for _ in range(20_000):
        tree = sample_bp(SizePmf.point_mass(1), t, 2, 10, rng)
        counts.append(int(np.sum(tree.depths()[tree.kind == VERTEX] == 5)))
    counts = np.array(counts)
    assert abs(counts.mean() - 2 * t) <= 4 * counts.std() / math.sqrt(counts.size)


def test_single_vertex_probability_python_sampler():
    rng = np.random.default_rng(4)
    hits = sum(sample_bp(SizePmf.point_mass(1), 0.25, 2, 1000, rng).n_vertex_nodes == 1 for _ in range(40_000))
    p = math.exp(-0.5)
    assert abs(hits / 40_000 - p) <= 4 * math.sqrt(p * (1 - p) / 40_000)


def test_reconstruct_places_parent_in_its_slot():
    rows = [(ROOT, -1, -1, np.nan)]
    vertex_block(rows, 0, 1)                 # node 1
    for j in range(3):
        rows.append((INDEX, 1, j, np.nan))   # nodes 2, 3, 4
    rows.append((TUPLE, 3, -1, 0.1))         # node 5 under the second index node
    rows.append((COMPONENT, 5, 1, np.nan))   # node 6, listed out of type order
    rows.append((COMPONENT, 5, 0, np.nan))   # node 7
    vertex_block(rows, 7, 2)
    vertex_block(rows, 6, 4)
    rec = reconstruct(build(3, rows))
    comp_of = {0: "parent", 1: "after", 2: "before"}
    sizes = rec.sizes.tolist()
    assert [comp_of[c] for c in rec.tuples[0]] == ["before", "parent", "after"]
    assert [sizes[c] for c in rec.tuples[0]] == [2, 1, 4]
    assert not rec.degenerate


def two_tuple_tree():
    """Root component of size 1 and tuples whose effect on it depends on order."""
    rows = [(ROOT, -1, -1, np.nan)]
    vertex_block(rows, 0, 1)
    for j in range(4):
        rows.append((INDEX, 1, j, np.nan))
    for time, sizes in ((0.1, (1, 2, 2)), (0.2, (2, 1, 2))):
        tup = len(rows)
        rows.append((TUPLE, 2, -1, time))
        for ctype, c in enumerate(sizes):
            comp = len(rows)
            rows.append((COMPONENT, tup, ctype, np.nan))
            vertex_block(rows, comp, c)
    return build(4, rows)


def brute_force(order):
    """Union-find over the hand-labelled components of :func:`two_tuple_tree`."""
    size = {"root": 1, "a1": 1, "a2": 2, "a3": 2, "b1": 2, "b2": 1, "b3": 2}
    tuples = {0: ("root", "a1", "a2", "a3"), 1: ("root", "b1", "b2", "b3")}
    owner = {k: k for k in size}

    def find(x):
        while owner[x] != x:
            x = owner[x]
        return x

    for row in order:
        c = [find(x) for x in tuples[row]]
        w = [size[x] for x in c]
        a, b = (0, 1) if w[0] * w[1] <= w[2] * w[3] else (2, 3)
        if c[a] != c[b]:
            owner[c[b]] = c[a]
            size[c[a]] += size[c[b]]
    return size[find("root")]


def test_product_rule_order_enumeration():
    tree = two_tuple_tree()
    rule = product_rule(2)
    outcomes = {perm: eval_component(rule, tree, order=np.array(perm)) for perm in ((0, 1), (1, 0))}
    assert outcomes == {perm: brute_force(perm) for perm in outcomes}
    assert outcomes[(0, 1)] != outcomes[(1, 0)]
    assert eval_component(rule, tree, order="time") == outcomes[(0, 1)]
    rng = np.random.default_rng(5)
    draws = [eval_component(rule, tree, rng) for _ in range(4000)]
    share = draws.count(outcomes[(1, 0)]) / len(draws)
    assert abs(share - 0.5) < 0.05


def test_er_evaluation_counts_every_reached_vertex():
    rng = np.random.default_rng(6)
    for _ in range(200):
        tree = sample_bp(SizePmf.point_mass(1), 0.3, 2, 10_000, rng)
        assert eval_component("er", tree, rng) == tree.n_vertex_nodes


def test_degenerate_tree_evaluates_to_zero():
    rows = [(ROOT, -1, -1, np.nan)]
    vertex_block(rows, 0, 1)
    rows += [(INDEX, 1, 0, np.nan), (INDEX, 1, 1, np.nan), (TUPLE, 2, -1, 0.1), (COMPONENT, 4, 0, np.nan)]
    tree = build(2, rows)
    assert tree.degenerate and eval_component("er", tree, order="time") == 0


def test_eval_rejects_bad_inputs():
    tree = two_tuple_tree()
    with pytest.raises(RuleError):
        eval_component("er", tree, order="time")
    with pytest.raises(RuleError):
        eval_component("d_r:r=2", tree, order="time")
    with pytest.raises(ValueError):
        eval_component("product", tree, order=np.array([0, 0]))
    with pytest.raises(ValueError):
        eval_component("product", tree)


# -- estimates ------------------------------------------------------------------

def test_zero_time_estimate_returns_seed_law():
    phi = SizePmf.from_dict({1: 0.6, 2: 0.3, 5: 0.1})
    est = estimate_rho("product", phi, 0.0, samples=50_000, seed=1)
    for k in (1, 2, 5):
        assert abs(est.pmf[k] - phi[k]) <= 4 * est.stderr(k)


def test_borel_law_recovered_for_pair_rule():
    est = estimate_rho("er", SizePmf.point_mass(), 0.25, samples=200_000, seed=2)
    for k in range(1, 8):
        assert abs(est.pmf[k] - borel_oracle(k, 0.25)) <= 4 * est.stderr(k)


def test_multiple_times_share_trees_and_preserve_order():
    ests = estimate_rho("er", SizePmf.point_mass(), [0.2, 0.0, 0.1], samples=20_000, seed=3)
    assert [e.t for e in ests] == [0.2, 0.0, 0.1]
    assert ests[1].pmf[1] == 1.0
    assert ests[0].chi > ests[2].chi > 1


def test_compiled_and_python_paths_agree():
    kw = dict(samples=6000, seed=4)
    fast = estimate_rho("product", SizePmf.point_mass(), 0.05, **kw)
    slow = estimate_rho("product", SizePmf.point_mass(), 0.05, compiled=False, **kw)
    for k in (1, 2, 3):
        se = math.hypot(fast.stderr(k), slow.stderr(k))
        assert abs(fast.pmf[k] - slow.pmf[k]) <= 4 * se


def test_custom_size_rule_uses_python_path():
    twin = custom_rule("twin_product", 4, product_rule(2).chooser)
    est = estimate_rho(twin, SizePmf.point_mass(), 0.04, samples=3000, seed=5)
    ref = estimate_rho("product", SizePmf.point_mass(), 0.04, samples=100_000, seed=5)
    assert abs(est.pmf[1] - ref.pmf[1]) <= 4 * math.hypot(est.stderr(1), ref.stderr(1))


@pytest.mark.parametrize("rule", ["product", "sum", "reverse_product", "bounded", "min_rule:ell=4", "join_all:ell=4"])
def test_mean_size_below_growth_bound(rule):
    t = 0.05
    est = estimate_rho(rule, SizePmf.point_mass(), t, samples=100_000, seed=6)
    bound = 1.0 / (1.0 - 12 * t)
    assert est.chi <= bound + 4 * est.chi_se


def test_truncated_samples_are_reported():
    est = estimate_rho("er", SizePmf.point_mass(), 0.8, samples=20_000, cap=200, seed=7)
    assert est.truncated_mass > 0.3
    assert est.pmf.mass + est.truncated_mass + est.degenerate_mass == pytest.approx(1.0)


def test_estimate_argument_errors():
    with pytest.raises(ValueError):
        estimate_rho("er", SizePmf.point_mass(), -0.1)
    with pytest.raises(ValueError):
        estimate_rho("er", SizePmf.point_mass(), 0.1, samples=0)
    with pytest.raises(RuleError):
        estimate_rho("c_ell:ell=4", SizePmf.point_mass(), 0.1)


# -- stitching ------------------------------------------------------------------

def test_first_stage_lengths():
    assert stitch("er", 0.01, samples=2000).stages[0].delta == pytest.approx(1 / 6)
    assert stitch("product", 0.01, samples=2000).stages[0].delta == pytest.approx(1 / 36)


def test_stage_lengths_follow_previous_mean_exactly():
    res = stitch("product", 0.2, samples=50_000, seed=1)
    assert res.t_stop >= 0.2 and not res.exhausted
    for prev, stage in zip(res.stages, res.stages[1:]):
        assert stage.L == prev.end.pmf.normalized().chi + 1
        assert stage.delta == stage_length(stage.L, 4)
        assert stage.t_start == prev.t_end
        assert stage.start == prev.end.pmf.normalized()


def test_er_stitch_tracks_closed_form():
    res = stitch("er", 0.3, samples=200_000, seed=2)
    times = [0.05, 0.15, 0.25, 0.3]
    s = res.s_curve(times)
    for t, v in zip(times, s):
        assert v == pytest.approx(er_susceptibility(t), rel=0.05)
    assert res.phi(1, 0.0) == 1.0


def test_exhaustion_beyond_blowup():
    res = stitch("product", 2.0, samples=100_000, seed=3)
    assert res.exhausted and res.exhaustion_point >= 1 / 12
    assert res.final_delta >= res.floor
    assert stage_length(res.stages[-1].end.pmf.normalized().chi + 1, 4) < res.floor


def test_join_all_exhausts_just_short_of_closed_form_blowup():
    # mean size is 1/(1 - 12t), so the time left before blow-up is 1/(12 s)
    res = stitch("join_all:ell=4", 1.0, samples=100_000, seed=3)
    s = res.stages[-1].end.chi
    assert res.exhausted
    assert res.exhaustion_point + 1 / (12 * s) == pytest.approx(1 / 12, rel=0.05)
    with pytest.raises(ValueError):
        res.stage_at(res.t_stop + 0.01)


def test_stage_lookup_outside_range():
    res = stitch("er", 0.1, samples=5000)
    with pytest.raises(ValueError):
        res.stage_at(res.t_stop + 0.01)


def test_abort_keeps_partial_result():
    with pytest.raises(StitchAborted) as info:
        stitch("er", 0.49, samples=20_000, cap=30, seed=4)
    assert info.value.result.stages
    with pytest.raises(StitchAborted):
        stitch("er", 0.4, samples=2000, max_stages=1)


def test_stitch_table_csv():
    res = stitch("er", 0.1, samples=5000)
    text = res.to_csv(header={"rule": "er"})
    lines = text.splitlines()
    assert lines[0].startswith("# achlab-stitch/1") and lines[1] == '# config: {"rule": "er"}'
    assert lines[2] == "j,t_start,delta,L,t_end,chi,chi_se,truncated_mass"
    assert len(lines) == 3 + len(res.stages)


def test_stitch_argument_errors():
    with pytest.raises(ValueError):
        stitch("er", -1)
    with pytest.raises(ValueError):
        stitch("er", 0.1, gamma=0)
