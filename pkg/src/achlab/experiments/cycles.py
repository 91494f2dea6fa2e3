"""Cycle structure of small components under acyclic rules, and exploration-tree checks."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..branching import TupleIndex, hypergraph_components
from ..engine import RunConfig, run, run_ensemble, run_poisson
from ..rng import derive_seed, stream
from ..rules import RuleContext, RuleError, RuleSpec, decide, resolve, validate_acyclic
from .report import FAIL, OPEN, PASS, ExperimentReport, verdict_rule


def check_acyclic(rule: RuleSpec, trials: int = 1000, seed: int = 0) -> None:
    """Reject rules not flagged acyclic, and sample decisions to confirm the flag."""
    if not rule.acyclic:
        raise RuleError(f"rule {rule.label} can add a cycle within one step")
    rng = stream(seed, "acyclic-probe")
    for _ in range(trials):
        roots = rng.integers(0, rule.ell, rule.ell)
        sizes = {r: int(rng.integers(1, 50)) for r in set(roots.tolist())}
        labels = roots.tolist()
        ctx = RuleContext.from_roots(labels, [sizes[r] for r in labels], step_index=int(rng.integers(1, 100)),
                                     n=100, susceptibility=2.0)
        if not validate_acyclic(decide(rule, ctx, rng), rule.ell):
            raise RuleError(f"rule {rule.label} produced a cycle on sizes {ctx.sizes}")


def default_U(n: int) -> int:
    return int(math.log(n) ** 2)


@verdict_rule("cycles")
def _cycles_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = tables["runs"]
    ns = sorted({r["n"] for r in rows})
    fits: dict = {"zero_complex_fraction": {}, "max_unicyclic": {}, "unicyclic_bound": {}}
    ok = True
    for n in ns:
        cells = [r for r in rows if r["n"] == n]
        zero = float(np.mean([r["complex_small_count"] == 0 for r in cells]))
        U = cells[0]["U"]
        bound = U**2 * n ** (2 * tol["delta"])
        worst = max(r["unicyclic_vertices"] for r in cells)
        fits["zero_complex_fraction"][n] = zero
        fits["max_unicyclic"][n] = worst
        fits["unicyclic_bound"][n] = bound
        ok = ok and zero >= tol["zero_fraction"] and worst <= bound
    return (PASS if ok else FAIL), fits


def cycle_check(rule: RuleSpec | str, t: float, n_grid: Sequence[int], U: int | None = None, reps: int = 100,
                delta: float = 0.2, zero_fraction: float = 0.99, seed: int = 0,
                workers: int | None = None) -> ExperimentReport:
    """Complex components of size at most ``U`` and vertices in small unicyclic components at time ``t``.

    PASS if at every ``n`` at least ``zero_fraction`` of replicas have no
    small complex component and no replica has more than ``U^2 n^(2 delta)``
    vertices in unicyclic components of size at most ``U``.
    """
    spec = resolve(rule)
    check_acyclic(spec, seed=seed)
    n_grid = sorted(int(n) for n in n_grid)
    rows = []
    for n in n_grid:
        u = default_U(n) if U is None else int(U)
        cfg = RunConfig(n=n, rule=spec.label, t_max=t, census_U=u, seed=derive_seed(seed, "cycles", n))
        for rep, s in enumerate(run_ensemble(cfg, reps, workers)):
            c = s.final().census
            rows.append({"n": n, "rep": rep, "U": u, "complex_small_count": c.complex_small_count,
                         "unicyclic_vertices": c.unicyclic_vertices, "complex_vertices": c.complex_vertices})
    tol = {"delta": delta, "zero_fraction": zero_fraction}
    config = {"rule": spec.label, "t": t, "n_grid": n_grid, "U": U, "reps": reps, "seed": seed}
    return ExperimentReport.build("cycles", config, {"runs": rows}, tol)


@verdict_rule("explore")
def _explore_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = sorted(tables["rates"], key=lambda r: r["n"])
    mismatches = sum(r["mismatches"] for r in rows)
    rate = [r["bad_trees"] / r["trees"] for r in rows]
    fits = {"n": [r["n"] for r in rows], "bad_tree_rate": rate,
            "bad_set_rate": [r["bad_sets"] / r["sets"] for r in rows], "mismatches": mismatches}
    if rate[0] == 0:
        return (FAIL if mismatches else OPEN), fits
    ratio = rate[0] / rate[-1] if rate[-1] > 0 else math.inf
    fits["decay_ratio"] = ratio
    ok = mismatches == 0 and (len(rows) < 2 or ratio >= tol["min_ratio"])
    return (PASS if ok else FAIL), fits


def exploration_check(n_grid: Sequence[int] = (10_000, 100_000, 1_000_000), t: float = 0.25, seed_t: float = 0.1,
                      graphs: int = 2, vertices: int = 2_000_000, checked_starts: int = 200, seed: int = 0,
                      min_ratio: float = 5.0) -> ExperimentReport:
    """Bad-set frequency of exploration trees over every start vertex, and vertex sets against ground truth.

    Each graph is a vertex-pair seed forest at time ``seed_t`` plus
    ``Poisson(t n)`` uniform vertex pairs.  Bad sets are rare and each one
    spoils every start in its component, so each ``n`` uses at least
    ``graphs`` graphs and enough of them to cover ``vertices`` vertices.

    PASS if no explored vertex set differs from its true component and the
    bad-tree rate falls by at least ``min_ratio`` from the smallest to the
    largest ``n``.
    """
    n_grid = sorted(int(n) for n in n_grid)
    rows = []
    for n in n_grid:
        agg = {"n": n, "graphs": 0, "trees": 0, "bad_trees": 0, "sets": 0, "bad_sets": 0,
               "mismatches": 0, "checked": 0}
        for g in range(max(graphs, math.ceil(vertices / n))):
            base = derive_seed(seed, "explore", n, g)
            F = run(RunConfig(n=n, rule="er", t_max=seed_t, light=True, seed=base), keep_forest=True).forest
            tuples = run_poisson("er", n, t, seed=base, replica=1, record_tuples=True, light=True).tuples
            index = TupleIndex(F, tuples)
            bf = index.bad_frequency(np.arange(n))
            agg["graphs"] += 1
            agg["trees"] += bf.trees
            agg["bad_trees"] += bf.bad_trees
            agg["sets"] += bf.sets
            agg["bad_sets"] += bf.bad_sets
            H = hypergraph_components(F, tuples)
            labels = H.labels()
            for v in stream(base, "starts").integers(0, n, checked_starts):
                found = index.explore(int(v)).vertices
                truth = np.flatnonzero(labels == labels[v])
                agg["mismatches"] += int(not np.array_equal(found, truth))
                agg["checked"] += 1
        rows.append(agg)
    config = {"n_grid": n_grid, "t": t, "seed_t": seed_t, "graphs": graphs, "vertices": vertices,
              "checked_starts": checked_starts, "seed": seed}
    return ExperimentReport.build("explore", config, {"rates": rows}, {"min_ratio": min_ratio})
