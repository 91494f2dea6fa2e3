"""Tail fits of component-size profiles and agreement of simulation with the branching limit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..branching import SizePmf, borel, estimate_rho, stitch
from ..engine import RunConfig, mean_vertex_fractions, run_ensemble
from ..rng import derive_seed
from ..rules import RuleSpec, resolve
from .report import FAIL, PASS, ExperimentReport, verdict_rule


class FitError(ValueError):
    pass


def tail_profile(n_k: Mapping[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """``(k, N_{>=k})`` for every integer ``k`` from 1 to the largest size."""
    if not n_k:
        raise FitError("empty profile")
    k_max = max(n_k)
    dense = np.zeros(k_max + 1)
    for k, v in n_k.items():
        dense[int(k)] = v
    ngeq = np.cumsum(dense[::-1])[::-1]
    return np.arange(1, k_max + 1), ngeq[1:]


def fit_window(n_k: Mapping[int, int], k_min: int = 1, k_max: int | None = None, exclude_top: int = 2) -> tuple[int, int]:
    """Window ``[k_min, k_max]`` capped below the ``exclude_top`` largest occupied sizes."""
    occupied = sorted(k for k, v in n_k.items() if v > 0)
    if len(occupied) <= exclude_top:
        raise FitError(f"only {len(occupied)} occupied sizes; need more than {exclude_top}")
    hi = occupied[-exclude_top - 1] if exclude_top else occupied[-1]
    if k_max is not None:
        hi = min(hi, int(k_max))
    return int(k_min), int(hi)


@dataclass(frozen=True)
class TailFit:
    """``N_{>=k} ~ A exp(-a k) n`` (exponential) or ``C k^-x n`` (polynomial) on a window."""

    kind: str
    rate: float
    constant: float
    r2: float
    k_min: int
    k_max: int
    points: int
    envelope_constant: float

    def envelope(self, k: np.ndarray | float, n: float) -> np.ndarray | float:
        if self.kind == "exponential":
            return self.envelope_constant * np.exp(-self.rate * np.asarray(k, dtype=float)) * n
        return self.envelope_constant * np.asarray(k, dtype=float) ** (-self.rate) * n

    def verdict(self, r2_min: float = 0.9, expected_rate: float | None = None, rate_tol: float = 0.1) -> str:
        ok = self.rate > 0 and self.r2 >= r2_min
        if expected_rate is not None:
            ok = ok and abs(self.rate - expected_rate) <= rate_tol
        return PASS if ok else FAIL


def envelope_constant(n_k: Mapping[int, int], n: int, x: float, k_max: int, k_min: int = 1) -> float:
    """Smallest ``C`` with ``N_{>=k} <= C k^-x n`` for all ``k_min <= k <= k_max``."""
    ks, ngeq = tail_profile(n_k)
    sel = (ks >= k_min) & (ks <= k_max)
    return float(np.max(ngeq[sel] * ks[sel].astype(float) ** x) / n)


def tail_fit(n_k: Mapping[int, int], n: int | None = None, kind: str = "exponential", k_min: int = 1,
             k_max: int | None = None, exclude_top: int = 2) -> TailFit:
    """Least-squares fit of ``log N_{>=k}`` against ``k`` or ``log k``.

    ``n_k`` maps size to number of vertices in components of that size.
    The polynomial fit uses geometrically spaced ``k`` so each scale weighs
    equally.
    """
    if kind not in ("exponential", "polynomial"):
        raise ValueError(f"kind must be 'exponential' or 'polynomial', got {kind!r}")
    n = int(n if n is not None else sum(n_k.values()))
    lo, hi = fit_window(n_k, k_min, k_max, exclude_top)
    ks, ngeq = tail_profile(n_k)
    if kind == "exponential":
        sel = np.arange(lo, hi + 1)
    else:
        sel = np.unique(np.round(np.geomspace(lo, hi, num=min(40, hi - lo + 1))).astype(int))
    sel = sel[ngeq[sel - 1] > 0]
    if sel.size < 3:
        raise FitError(f"need at least 3 nonzero points in [{lo}, {hi}], got {sel.size}")
    y = np.log(ngeq[sel - 1] / n)
    x = sel.astype(float) if kind == "exponential" else np.log(sel)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / total if total > 0 else 1.0
    rate = -float(slope)
    env = float(np.max(np.exp(y + rate * x)))
    return TailFit(kind, rate, math.exp(intercept), r2, lo, hi, int(sel.size), env)


def total_variation(sim: Mapping[int, float], rho: Mapping[int, float], rho_remainder: float = 0.0) -> float:
    keys = set(sim) | set(rho)
    return 0.5 * (sum(abs(sim.get(k, 0.0) - rho.get(k, 0.0)) for k in keys) + rho_remainder)


def reference_rho(rule: RuleSpec, t: float, reference: str, samples: int, seed: int,
                  stitch_samples: int | None = None, cap: int = 100_000) -> SizePmf:
    if reference == "borel":
        # every 2-vertex size rule must join the pair, so all of them coincide
        if rule.ell != 2:
            raise ValueError("the closed form applies to 2-vertex rules only")
        return borel(t, 10_000)
    if reference == "bp":
        return estimate_rho(rule, SizePmf.point_mass(), t, samples=samples, seed=seed, key=("compare",), cap=cap).pmf
    if reference == "stitch":
        result = stitch(rule, t, samples=stitch_samples or samples, seed=seed, cap=cap)
        return result.estimate(t, samples).pmf
    raise ValueError(f"unknown reference {reference!r}")


@verdict_rule("compare")
def _compare_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rho = {int(r["k"]): r["rho"] for r in tables["rho"]}
    per_n: dict[int, dict[int, float]] = {}
    for r in tables["sim"]:
        per_n.setdefault(int(r["n"]), {})[int(r["k"])] = r["frac"]
    ns = sorted(per_n)
    D = [total_variation(per_n[n], rho, tol["rho_remainder"]) for n in ns]
    sup = [max(abs(per_n[n].get(k, 0.0) - rho.get(k, 0.0)) for k in set(per_n[n]) | set(rho)) for n in ns]
    fits = {"n": ns, "D": D, "sup_dev": sup}
    decreasing = all(b < a for a, b in zip(D, D[1:]))
    fits["decreasing"] = decreasing
    ok = decreasing and D[-1] < tol["max_D"]
    return (PASS if ok else FAIL), fits


def compare_rho(rule: RuleSpec | str, t: float, n_grid: Sequence[int], reps: int = 50, reference: str = "stitch",
                samples: int = 1_000_000, stitch_samples: int | None = None, seed: int = 0, max_D: float = 0.02,
                workers: int | None = None, rho: SizePmf | None = None) -> ExperimentReport:
    """Total-variation distance between mean ``N_k/n`` and the limiting size law at time ``t``.

    PASS if the distance strictly decreases along ``n_grid`` and is below
    ``max_D`` at the largest ``n``.  ``reference`` selects the limit law:
    ``"stitch"`` (chained branching stages), ``"bp"`` (one branching stage
    from isolated vertices) or ``"borel"`` (closed form, vertex-pair rule).
    """
    spec = resolve(rule)
    n_grid = sorted(int(n) for n in n_grid)
    if rho is None:
        rho = reference_rho(spec, t, reference, samples, seed, stitch_samples)
    sim_rows = []
    for n in n_grid:
        cfg = RunConfig(n=n, rule=spec.label, t_max=t, seed=derive_seed(seed, "compare", n))
        series = run_ensemble(cfg, reps, workers)
        step = series[0].final().step
        for k, frac in mean_vertex_fractions(series, step).items():
            sim_rows.append({"n": n, "k": k, "frac": frac})
    tables = {"rho": [{"k": k, "rho": p} for k, p in rho.as_dict().items()], "sim": sim_rows}
    tol = {"max_D": max_D, "rho_remainder": rho.remainder}
    config = {"rule": spec.label, "t": t, "n_grid": n_grid, "reps": reps, "reference": reference,
              "samples": samples, "stitch_samples": stitch_samples, "seed": seed}
    return ExperimentReport.build("compare", config, tables, tol)
