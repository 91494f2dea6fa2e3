"""Blow-up and giant-component thresholds, and fluctuation scaling, from direct simulation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..engine import RunConfig, run_ensemble
from ..rng import derive_seed
from ..rules import RuleSpec, resolve
from .report import FAIL, OPEN, PASS, ExperimentReport, verdict_rule

DEFAULT_T_GRID = tuple(round(0.01 * i, 2) for i in range(0, 121))


def _rule_label(rule: RuleSpec | str) -> str:
    return resolve(rule).label


def measure_grid(rule: RuleSpec | str, n_grid: Sequence[int], t_grid: Sequence[float], reps: int,
                 seed: int = 0, workers: int | None = None) -> list[dict]:
    """Mean and median of ``S`` and ``L1/n`` over replicas at every ``(n, t)`` cell."""
    label = _rule_label(rule)
    rows = []
    for n in n_grid:
        cfg = RunConfig(n=int(n), rule=label, t_grid=list(t_grid), light=True, seed=derive_seed(seed, "grid", n))
        series = run_ensemble(cfg, reps, workers)
        for i, t in enumerate(sorted(set(int(np.floor(t * n)) for t in t_grid))):
            S = np.array([s.snapshots[i].S for s in series])
            L = np.array([s.snapshots[i].L1 / n for s in series])
            rows.append({"n": int(n), "t": t / n, "S_mean": float(S.mean()), "S_median": float(np.median(S)),
                         "L1_frac_mean": float(L.mean()), "L1_frac_median": float(np.median(L))})
    return rows


def first_crossing(ts: Sequence[float], values: Sequence[float], level: float) -> float | None:
    for t, v in zip(ts, values):
        if v >= level:
            return float(t)
    return None


def _by_n(rows: list[dict]) -> dict[int, list[dict]]:
    out: dict[int, list[dict]] = {}
    for row in rows:
        out.setdefault(int(row["n"]), []).append(row)
    for v in out.values():
        v.sort(key=lambda r: r["t"])
    return dict(sorted(out.items()))


def extrapolate(ns: Sequence[int], values: Sequence[float], exponent: float) -> tuple[float, float]:
    """Fit ``value = a + b n^(-exponent)``; returns ``(a, b)`` (``b = 0`` for a single point)."""
    x = np.asarray(ns, dtype=float) ** (-exponent)
    y = np.asarray(values, dtype=float)
    if len(x) == 1:
        return float(y[0]), 0.0
    b, a = np.polyfit(x, y, 1)
    return float(a), float(b)


def _blowup_estimates(rows: list[dict], exponent: float) -> tuple[dict[int, float | None], float | None]:
    per_n = {}
    for n, cells in _by_n(rows).items():
        per_n[n] = first_crossing([c["t"] for c in cells], [c["S_mean"] for c in cells], n**exponent)
    found = {n: t for n, t in per_n.items() if t is not None}
    if len(found) < len(per_n):
        return per_n, None
    return per_n, extrapolate(list(found), list(found.values()), exponent)[0]


def _l1_estimates(rows: list[dict], fraction: float) -> dict[int, float | None]:
    return {n: first_crossing([c["t"] for c in cells], [c["L1_frac_mean"] for c in cells], fraction)
            for n, cells in _by_n(rows).items()}


@verdict_rule("blowup")
def _blowup_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = tables["grid"]
    per_n, estimate = _blowup_estimates(rows, tol["threshold_exponent"])
    fits: dict = {"t_hat_per_n": per_n, "t_hat": estimate}
    if estimate is None:
        return OPEN, fits
    ell = tol["ell"]
    lower = 1.0 / (ell * (ell - 1)) - tol["slack"]
    upper = 1.0 + tol["slack"]
    fits["bracket"] = [lower, upper]
    ok = lower <= estimate <= upper
    giant = _l1_estimates(rows, tol["l1_fraction"])
    n_max = max(giant)
    fits["t_c_hat"] = giant[n_max]
    if giant[n_max] is not None:
        fits["below_giant"] = estimate <= giant[n_max] + tol["grid_step"]
        ok = ok and fits["below_giant"]
    return (PASS if ok else FAIL), fits


def detect_blowup(rule: RuleSpec | str, n_grid: Sequence[int], t_grid: Sequence[float] = DEFAULT_T_GRID,
                  reps: int = 10, seed: int = 0, threshold_exponent: float = 0.25, slack: float | None = None,
                  l1_fraction: float = 0.05, workers: int | None = None,
                  rows: list[dict] | None = None) -> ExperimentReport:
    """Per ``n``, the first grid time where mean ``S`` reaches ``n^threshold_exponent``.

    The per-``n`` times are extrapolated linearly in ``n^-threshold_exponent``;
    the intercept estimates the blow-up point.  PASS requires it to lie in
    ``[1/(ell(ell-1)) - slack, 1 + slack]`` and not to exceed the giant
    component threshold from the same runs by more than one grid step.
    """
    spec = resolve(rule)
    n_grid = sorted(int(n) for n in n_grid)
    t_grid = sorted(float(t) for t in t_grid)
    step = float(np.min(np.diff(t_grid))) if len(t_grid) > 1 else 0.0
    if rows is None:
        rows = measure_grid(spec, n_grid, t_grid, reps, seed, workers)
    tol = {"threshold_exponent": threshold_exponent, "ell": spec.ell, "grid_step": step,
           "slack": step if slack is None else slack, "l1_fraction": l1_fraction}
    config = {"rule": spec.label, "n_grid": n_grid, "t_grid": t_grid, "reps": reps, "seed": seed}
    return ExperimentReport.build("blowup", config, {"grid": rows}, tol)


@verdict_rule("scan")
def _scan_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = tables["grid"]
    fits = {f"t_c_hat@{f}": _l1_estimates(rows, f) for f in tol["sensitivity"]}
    per_n = _l1_estimates(rows, tol["fraction"])
    fits["t_c_hat_per_n"] = per_n
    if any(v is None for v in per_n.values()):
        return OPEN, fits
    estimate = per_n[max(per_n)]
    fits["t_c_hat"] = estimate
    ok = True
    if tol.get("min") is not None:
        ok = ok and estimate > tol["min"]
    if tol.get("max") is not None:
        ok = ok and estimate < tol["max"]
    return (PASS if ok else FAIL), fits


def scan_l1(rule: RuleSpec | str, n_grid: Sequence[int], t_grid: Sequence[float] = DEFAULT_T_GRID,
            reps: int = 10, seed: int = 0, fraction: float = 0.05, sensitivity: Sequence[float] = (0.02, 0.10),
            lower: float | None = None, upper: float | None = None, workers: int | None = None,
            rows: list[dict] | None = None) -> ExperimentReport:
    """First grid time where mean ``L1/n`` reaches ``fraction``, per ``n``; the largest ``n`` is the estimate.

    With ``lower``/``upper`` the estimate must lie strictly inside those bounds.
    """
    spec = resolve(rule)
    n_grid = sorted(int(n) for n in n_grid)
    t_grid = sorted(float(t) for t in t_grid)
    if rows is None:
        rows = measure_grid(spec, n_grid, t_grid, reps, seed, workers)
    tol = {"fraction": fraction, "sensitivity": list(sensitivity), "min": lower, "max": upper}
    config = {"rule": spec.label, "n_grid": n_grid, "t_grid": t_grid, "reps": reps, "seed": seed}
    return ExperimentReport.build("scan", config, {"grid": rows}, tol)


@verdict_rule("concentration")
def _concentration_verdict(tables: dict, tol: dict) -> tuple[str, dict]:
    rows = tables["sd"]
    slopes = {}
    for k in sorted({r["k"] for r in rows}):
        cells = sorted((r for r in rows if r["k"] == k), key=lambda r: r["n"])
        if len(cells) < 2 or any(c["sd"] <= 0 for c in cells):
            slopes[k] = None
            continue
        slopes[k] = float(np.polyfit(np.log([c["n"] for c in cells]), np.log([c["sd"] for c in cells]), 1)[0])
    fits = {"exponent": slopes}
    if any(v is None for v in slopes.values()):
        return OPEN, fits
    ok = all(abs(s - tol["target"]) <= tol["delta"] for s in slopes.values())
    return (PASS if ok else FAIL), fits


def concentration_check(rule: RuleSpec | str, t: float, n_grid: Sequence[int], reps: int = 200,
                        ks: Sequence[int] = (1,), seed: int = 0, delta: float = 0.15,
                        workers: int | None = None) -> ExperimentReport:
    """Standard deviation of ``N_k`` across replicas at time ``t``; PASS if it scales as ``n^(1/2 +- delta)``."""
    spec = resolve(rule)
    n_grid = sorted(int(n) for n in n_grid)
    rows = []
    for n in n_grid:
        cfg = RunConfig(n=n, rule=spec.label, t_max=t, seed=derive_seed(seed, "concentration", n))
        series = run_ensemble(cfg, reps, workers)
        for k in ks:
            values = np.array([s.final().N_k.get(k, 0) for s in series], dtype=float)
            rows.append({"n": n, "k": int(k), "mean": float(values.mean()), "sd": float(values.std(ddof=1))})
    tol = {"target": 0.5, "delta": delta}
    config = {"rule": spec.label, "t": t, "n_grid": n_grid, "reps": reps, "ks": list(ks), "seed": seed}
    return ExperimentReport.build("concentration", config, {"sd": rows}, tol)
