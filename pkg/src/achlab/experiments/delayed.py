"""Delayed percolation: vertex-pair steps up to ``n/2``, then the r-sum rule."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..engine import RunConfig, run_ensemble
from ..rng import derive_seed
from .limits import envelope_constant, tail_profile
from .report import FAIL, OPEN, PASS, ExperimentReport, verdict_rule

TAIL_EXPONENT = 0.5


def tail_ok(seed_nk: dict[int, int], after_nk: dict[int, int], n: int, factor: float = 2.0) -> tuple[bool, float]:
    """Whether ``N_{>=k}`` after the r-sum steps stays below ``factor * C k^-1/2 n`` for ``k <= n^(1/3)``.

    ``C`` is the smallest constant covering the seed profile on the same range.
    """
    k_max = int(n ** (1 / 3))
    C = envelope_constant(seed_nk, n, TAIL_EXPONENT, k_max)
    ks, ngeq = tail_profile(after_nk)
    sel = ks <= k_max
    bound = factor * C * ks[sel].astype(float) ** (-TAIL_EXPONENT) * n
    return bool(np.all(ngeq[sel] <= bound)), C


@verdict_rule("delayed")
def _delayed_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = tables["runs"]
    ns = sorted({r["n"] for r in rows})
    med = lambda key, n, arm="delayed": float(np.median([r[key] for r in rows if r["n"] == n and r["arm"] == arm]))  # noqa: E731
    fits: dict = {"n": ns,
                  "S_half_median": [med("S_half", n) for n in ns],
                  "L1_after_median": [med("L1_after_frac", n) for n in ns]}
    checks = {}
    if len(ns) >= 2:
        S = fits["S_half_median"]
        growth = [(S[i + 1] / S[i]) ** (1.0 / math.log10(ns[i + 1] / ns[i])) for i in range(len(ns) - 1)]
        fits["S_growth_per_decade"] = growth
        checks["S_growth"] = all(g >= tol["growth_per_decade"] for g in growth)
        L = fits["L1_after_median"]
        checks["L1_decreasing"] = all(b < a for a, b in zip(L, L[1:]))
    if any(r["arm"] == "control" for r in rows):
        fits["control_L1_after_median"] = [med("L1_after_frac", n, "control") for n in ns]
        checks["control_giant"] = fits["control_L1_after_median"][-1] >= tol["control_min_L1"]
    tails = [r for r in rows if r["arm"] == "delayed" and r.get("tail_ok") is not None]
    if tails:
        fits["tail_ok_fraction"] = {n: float(np.mean([r["tail_ok"] for r in tails if r["n"] == n])) for n in ns}
        fits["C_hat_median"] = float(np.median([r["C_hat"] for r in tails]))
        checks["tail"] = all(f >= tol["tail_fraction"] for f in fits["tail_ok_fraction"].values())
        r, x, C = tol["r"], TAIL_EXPONENT, fits["C_hat_median"]
        fits["proof_delta"] = 2.0 ** (-((2 + x) * r + 3)) * C ** (-(r - 1))
    fits["checks"] = checks
    if not checks:
        return OPEN, fits
    return (PASS if all(checks.values()) else FAIL), fits


def delayed_percolation(r: int = 3, delta: float = 0.01, n_grid: Sequence[int] = (10_000, 100_000, 1_000_000),
                        reps: int = 50, seed: int = 0, control: bool = True, tail_check: bool = True,
                        growth_per_decade: float = 2.0, control_min_L1: float = 0.01, tail_fraction: float = 0.95,
                        workers: int | None = None) -> ExperimentReport:
    """Susceptibility at step ``n/2`` and giant fraction ``delta n`` steps later under the delayed r-sum rule.

    PASS needs: median ``S`` at ``n/2`` growing by ``growth_per_decade`` per
    decade of ``n``; median ``L1/n`` at ``n/2 + delta n`` strictly decreasing
    in ``n``; the control arm (vertex-pair steps throughout) keeping
    ``L1/n >= control_min_L1`` at the largest ``n``; and the tail envelope
    holding in at least ``tail_fraction`` of replicas at every ``n``.
    """
    if r < 3:
        raise ValueError(f"r must be >= 3, got {r}")
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    n_grid = sorted(int(n) for n in n_grid)
    rows = []
    for n in n_grid:
        half, later = n // 2, n // 2 + int(math.floor(delta * n))
        arms = [("delayed", f"d_r:r={r}")] + ([("control", "er")] if control else [])
        for arm, rule in arms:
            cfg = RunConfig(n=n, rule=rule, snapshots=[half, later], light=not (tail_check and arm == "delayed"),
                            seed=derive_seed(seed, "delayed", arm, n))
            for rep, s in enumerate(run_ensemble(cfg, reps, workers)):
                a, b = s.at(half), s.at(later)
                row = {"n": n, "arm": arm, "rep": rep, "S_half": a.S, "L1_after_frac": b.L1 / n}
                if tail_check and arm == "delayed":
                    row["tail_ok"], row["C_hat"] = tail_ok(a.N_k, b.N_k, n)
                rows.append(row)
    tol = {"r": r, "growth_per_decade": growth_per_decade, "control_min_L1": control_min_L1,
           "tail_fraction": tail_fraction}
    config = {"r": r, "delta": delta, "n_grid": n_grid, "reps": reps, "seed": seed, "control": control,
              "tail_check": tail_check}
    return ExperimentReport.build("delayed", config, {"runs": rows}, tol)
