"""Discrete-step and Poisson-count runs of l-vertex processes.

A run draws its tuples from the stream ``(seed, replica, "tuples")`` in
fixed-size chunks, so the trajectory does not depend on the snapshot
schedule or on which code path (compiled or generic) applies the rule.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .forest import ComponentForest, CycleCensus
from .rng import stream
from .rules import RuleContext, RuleSpec, decide, resolve

CHUNK = 1 << 16
SERIES_FORMAT = "achlab-series/1"
CSV_COLUMNS = ("step", "t", "S", "L1", "k", "N_k")


class ConfigError(ValueError):
    pass


def default_census_U(n: int) -> int:
    return max(1, int(math.log(n) ** 2)) if n > 1 else 1


def default_workers() -> int:
    return max(1, int(os.environ.get("ACHLAB_WORKERS", "1")))


@dataclass
class RunConfig:
    n: int
    rule: str | RuleSpec
    steps: int | None = None
    t_max: float | None = None
    poisson_t: float | None = None
    snapshots: list[int] | None = None
    t_grid: list[float] | None = None
    seed: int = 0
    replica: int = 0
    sampling: str = "iid"
    duplicates: str = "multi"
    census_U: int | None = None
    light: bool = False
    record_tuples: bool = False
    use_kernel: bool = True

    def __post_init__(self) -> None:
        if int(self.n) < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        self.n = int(self.n)
        given = [x is not None for x in (self.steps, self.t_max, self.poisson_t)]
        if sum(given) > 1:
            raise ConfigError("give at most one of steps, t_max, poisson_t")
        if self.steps is not None and int(self.steps) < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        for name in ("t_max", "poisson_t"):
            value = getattr(self, name)
            if value is not None and float(value) < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
        if self.sampling not in ("iid", "distinct"):
            raise ConfigError(f"sampling must be 'iid' or 'distinct', got {self.sampling!r}")
        if self.duplicates not in ("multi", "simple"):
            raise ConfigError(f"duplicates must be 'multi' or 'simple', got {self.duplicates!r}")
        if int(self.seed) < 0 or int(self.replica) < 0:
            raise ConfigError("seed and replica must be non-negative")

    @property
    def rule_spec(self) -> RuleSpec:
        return resolve(self.rule)

    @property
    def U(self) -> int:
        return int(self.census_U) if self.census_U is not None else default_census_U(self.n)

    def planned_steps(self) -> int | None:
        """Step count, or None when it is drawn at run time (Poisson mode)."""
        if self.poisson_t is not None:
            return None
        if self.steps is not None:
            return int(self.steps)
        if self.t_max is not None:
            return int(math.floor(float(self.t_max) * self.n))
        points = self._schedule_points()
        return max(points) if points else 0

    def _schedule_points(self) -> list[int]:
        points = [int(s) for s in (self.snapshots or [])]
        points += [int(math.floor(float(t) * self.n)) for t in (self.t_grid or [])]
        return points

    def schedule(self, steps: int) -> list[int]:
        points = self._schedule_points()
        if any(p < 0 for p in points):
            raise ConfigError("snapshot steps must be >= 0")
        if any(p > steps for p in points) and self.poisson_t is None:
            raise ConfigError(f"snapshot beyond the last step {steps}")
        points = sorted({min(p, steps) for p in points} | {steps})
        return points

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["rule"] = self.rule.label if isinstance(self.rule, RuleSpec) else self.rule
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "n" not in data or "rule" not in data:
            raise ConfigError("config needs at least 'n' and 'rule'")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> RunConfig:
        return cls.from_dict(load_config_payload(path))


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    S: float
    sum_sq: int
    L1: int
    n_components: int
    N_k: dict[int, int] | None = None
    census: CycleCensus | None = None

    def n_geq(self, k: int) -> int:
        if self.N_k is None:
            raise ValueError("snapshot was taken without a histogram")
        return sum(v for size, v in self.N_k.items() if size >= k)


@dataclass
class StatsSeries:
    config: dict[str, Any]
    n: int
    ell: int
    snapshots: list[Snapshot]
    meta: dict[str, Any] = field(default_factory=dict)
    tuples: np.ndarray | None = None
    forest: ComponentForest | None = None

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    def at(self, step: int) -> Snapshot:
        for s in self.snapshots:
            if s.step == step:
                return s
        raise KeyError(f"no snapshot at step {step}")

    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def to_dict(self) -> dict[str, Any]:
        snaps = []
        for s in self.snapshots:
            item = {"step": s.step, "t": s.t, "S": s.S, "sum_sq": s.sum_sq, "L1": s.L1,
                    "n_components": s.n_components}
            if s.N_k is not None:
                item["N_k"] = {str(k): v for k, v in s.N_k.items()}
            if s.census is not None:
                item["census"] = s.census._asdict()
            snaps.append(item)
        return {"format": SERIES_FORMAT, "config": self.config, "seed": self.seed, "n": self.n,
                "ell": self.ell, "meta": self.meta, "snapshots": snaps}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StatsSeries:
        snaps = []
        for s in data["snapshots"]:
            nk = {int(k): int(v) for k, v in s["N_k"].items()} if "N_k" in s else None
            census = CycleCensus(**s["census"]) if "census" in s else None
            snaps.append(Snapshot(s["step"], s["t"], s["S"], s["sum_sq"], s["L1"], s["n_components"], nk, census))
        return cls(data["config"], data["n"], data["ell"], snaps, data.get("meta", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {SERIES_FORMAT} columns={','.join(CSV_COLUMNS)}\n")
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        if self.meta:
            buf.write("# meta: " + json.dumps(self.meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.snapshots:
            head = [s.step, repr(s.t), repr(s.S), s.L1]
            if not s.N_k:
                w.writerow(head + ["", ""])
            for k, v in sorted((s.N_k or {}).items()):
                w.writerow(head + [k, v])
        return buf.getvalue()

    def write(self, path: str | Path, fmt: str | None = None) -> None:
        path = Path(path)
        fmt = fmt or ("json" if path.suffix == ".json" else "csv")
        path.write_text(self.to_json() if fmt == "json" else self.to_csv())


def load_config_payload(path: str | Path) -> dict[str, Any]:
    """Read a run config from a JSON config, a JSON series, or a CSV header."""
    text = Path(path).read_text()
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
        raise ConfigError(f"{path}: no '# config:' header line")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    if isinstance(data, dict) and data.get("format") == SERIES_FORMAT:
        return data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


class _Tuples:
    """Chunked tuple source for one run."""

    def __init__(self, n: int, ell: int, rng: np.random.Generator, distinct: bool):
        if distinct and ell > n:
            raise ConfigError(f"cannot draw {ell} distinct vertices out of n={n}")
        self.n, self.ell, self.rng, self.distinct = n, ell, rng, distinct

    def draw(self, m: int) -> np.ndarray:
        tuples = self.rng.integers(0, self.n, size=(m, self.ell), dtype=np.int64)
        if self.distinct:
            pool = max(64, m * self.ell // 4)
            while K.fix_repeats(tuples, self.n, self.rng.integers(0, self.n, size=pool, dtype=np.int64)) < 0:
                pass
        return tuples


def _snapshot(forest: ComponentForest, step: int, cfg: RunConfig) -> Snapshot:
    n = forest.n
    if cfg.light:
        return Snapshot(step, step / n, forest.S, forest.sum_sq, forest.l1, forest.n_components)
    hist = forest.size_hist()
    nk = {k: k * c for k, c in hist.items()}
    return Snapshot(step, step / n, forest.S, forest.sum_sq, forest.l1, forest.n_components,
                    nk, forest.cycle_census(cfg.U))


def _generic_steps(forest: ComponentForest, rule: RuleSpec, tuples: np.ndarray, lo: int, hi: int,
                   step0: int, rule_rng: np.random.Generator) -> None:
    size = forest._size
    for i in range(lo, hi):
        tup = tuples[i]
        roots = [forest.find(v) for v in tup]
        ctx = RuleContext.from_roots(roots, [size[r] for r in roots], step_index=step0 + (i - lo) + 1,
                                     n=forest.n, susceptibility=forest.S)
        for a, b in decide(rule, ctx, rule_rng):
            if tup[a] != tup[b]:
                forest.add_edge(tup[a], tup[b])


def run(cfg: RunConfig, initial: ComponentForest | None = None, keep_forest: bool = False) -> StatsSeries:
    """Run one replica and record snapshots at the scheduled steps."""
    rule = cfg.rule_spec
    n = cfg.n
    if initial is not None:
        if initial.n != n:
            raise ConfigError(f"initial graph has n={initial.n}, config has n={n}")
        forest = initial.copy()
    else:
        forest = ComponentForest(n, simple=cfg.duplicates == "simple")
    meta: dict[str, Any] = {}
    if cfg.poisson_t is not None:
        steps = int(stream(cfg.seed, cfg.replica, "count").poisson(float(cfg.poisson_t) * n))
        meta["M"] = steps
    else:
        steps = cfg.planned_steps()
    schedule = cfg.schedule(steps)
    source = _Tuples(n, rule.ell, stream(cfg.seed, cfg.replica, "tuples"), cfg.sampling == "distinct")
    rule_rng = stream(cfg.seed, cfg.replica, "rule")
    compiled = cfg.use_kernel and rule.kernel is not None and forest._pairs is None

    snaps: list[Snapshot] = []
    recorded: list[np.ndarray] = []
    pending = iter(schedule)
    target = next(pending)
    if target == 0:
        snaps.append(_snapshot(forest, 0, cfg))
        target = next(pending, None)
    done = 0
    while done < steps:
        m = min(CHUNK, steps - done)
        tuples = source.draw(m)
        if cfg.record_tuples:
            recorded.append(tuples)
        pos = 0
        while pos < m:
            hi = m if target is None else min(m, target - done)
            if compiled:
                code, p1 = rule.kernel
                K.run_steps(forest._parent, forest._size, forest._edges, forest._hist, forest._acc,
                            tuples, pos, hi, code, p1, done + pos, n)
            else:
                _generic_steps(forest, rule, tuples, pos, hi, done + pos, rule_rng)
            pos = hi
            if target is not None and done + pos == target:
                snaps.append(_snapshot(forest, target, cfg))
                target = next(pending, None)
        done += m

    config = cfg.to_dict()
    series = StatsSeries(config, n, rule.ell, snaps, meta)
    if cfg.record_tuples:
        series.tuples = np.concatenate(recorded) if recorded else np.empty((0, rule.ell), np.int64)
    if keep_forest:
        series.forest = forest
    return series


def run_poisson(rule: RuleSpec | str, n: int, t: float, seed: int = 0, replica: int = 0,
                initial: ComponentForest | None = None, record_tuples: bool = False,
                keep_forest: bool = False, **options: Any) -> StatsSeries:
    """Present ``M ~ Poisson(t n)`` uniform tuples in arrival order (the graph ``H_t``)."""
    cfg = RunConfig(n=n, rule=rule, poisson_t=t, seed=seed, replica=replica,
                    record_tuples=record_tuples, **options)
    return run(cfg, initial=initial, keep_forest=keep_forest)


def _run_replica(args: tuple[RunConfig, int]) -> StatsSeries:
    cfg, replica = args
    return run(replace(cfg, replica=replica))


def run_ensemble(cfg: RunConfig, replicas: int | Iterable[int], workers: int | None = None) -> list[StatsSeries]:
    """Independent replicas of ``cfg``; results are ordered by replica index."""
    reps = list(range(replicas)) if isinstance(replicas, int) else list(replicas)
    workers = default_workers() if workers is None else workers
    jobs = [(cfg, r) for r in reps]
    if workers <= 1 or len(jobs) <= 1 or isinstance(cfg.rule, RuleSpec):
        return [_run_replica(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_replica, jobs))


def mean_vertex_fractions(series: Sequence[StatsSeries], step: int) -> dict[int, float]:
    """Average of ``N_k / n`` over replicas at one snapshot step."""
    acc: dict[int, float] = {}
    for s in series:
        snap = s.at(step)
        for k, v in (snap.N_k or {}).items():
            acc[k] = acc.get(k, 0.0) + v / s.n
    return {k: v / len(series) for k, v in sorted(acc.items())}
