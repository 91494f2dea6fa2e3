"""Extending the size law across time by chaining short branching-process stages.

Stage ``j`` starts from the law reached at the end of stage ``j-1`` (a point
mass at 1 initially), sets ``L_j`` to that law's mean plus one and runs for
``Delta_j = gamma / (ell (ell - 1) (L_j + 1))``.  Each stage is short enough
for the exploration process to stay subcritical.  The chain stops once the
requested time is covered or once the next stage would be shorter than
``floor``; in the latter case the reached time is a lower estimate of the
susceptibility blow-up point.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..rules import RuleSpec, resolve
from .estimate import DEFAULT_CAP, RhoEstimate, estimate_rho
from .pmf import SizePmf
from .tree import _size_rule

TABLE_COLUMNS = ("j", "t_start", "delta", "L", "t_end", "chi", "chi_se", "truncated_mass")


class StitchAborted(RuntimeError):
    """A stage exceeded its Monte Carlo error budget; ``result`` holds the stages completed so far."""

    def __init__(self, message: str, result: StitchResult):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class Stage:
    j: int
    t_start: float
    delta: float
    L: float
    start: SizePmf
    end: RhoEstimate

    @property
    def t_end(self) -> float:
        return self.t_start + self.delta


def stage_length(L: float, ell: int, gamma: float = 1.0) -> float:
    return gamma / (ell * (ell - 1) * (L + 1))


@dataclass
class StitchResult:
    rule: RuleSpec
    ell: int
    t_target: float
    samples: int
    cap: int
    floor: float
    gamma: float
    seed: int
    stages: list[Stage] = field(default_factory=list)
    exhausted: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def t_stop(self) -> float:
        """Time covered by the executed stages."""
        return self.stages[-1].t_end if self.stages else 0.0

    @property
    def final_delta(self) -> float:
        return self.stages[-1].delta if self.stages else 0.0

    @property
    def exhaustion_point(self) -> float | None:
        """Lower estimate of the blow-up time, when the chain stalled before ``t_target``."""
        return self.t_stop if self.exhausted else None

    def stage_at(self, t: float) -> Stage:
        if t < 0 or not self.stages or t > self.t_stop + 1e-12:
            raise ValueError(f"t={t} outside the stitched range [0, {self.t_stop}]")
        for stage in self.stages:
            if t <= stage.t_end:
                return stage
        return self.stages[-1]

    def estimate(self, t: float | Sequence[float], samples: int | None = None) -> RhoEstimate | list[RhoEstimate]:
        """Fresh estimate of the size law at ``t`` from the stored start law of its stage."""
        scalar = np.ndim(t) == 0
        times = [float(x) for x in np.atleast_1d(t)]
        samples = samples or self.samples
        out: list[RhoEstimate | None] = [None] * len(times)
        by_stage: dict[int, list[int]] = {}
        for i, x in enumerate(times):
            by_stage.setdefault(self.stage_at(x).j, []).append(i)
        for j, idx in by_stage.items():
            stage = self.stages[j - 1]
            local = [max(0.0, times[i] - stage.t_start) for i in idx]
            key = ("stitch-eval", j, samples, tuple(local))
            if key not in self._cache:
                self._cache[key] = estimate_rho(self.rule, stage.start, local, self.ell, samples, self.cap,
                                                self.seed, ("stitch-eval", j))
            for i, est in zip(idx, self._cache[key]):
                out[i] = est
        return out[0] if scalar else out

    def phi(self, k: int, t: float, samples: int | None = None) -> float:
        return self.estimate(t, samples).pmf[k]

    def s_curve(self, times: Sequence[float], samples: int | None = None) -> np.ndarray:
        """Estimated susceptibility (mean root component size) at each time."""
        return np.array([e.chi for e in self.estimate(list(times), samples)])

    def table(self) -> list[dict]:
        return [{"j": s.j, "t_start": s.t_start, "delta": s.delta, "L": s.L, "t_end": s.t_end,
                 "chi": s.end.chi, "chi_se": s.end.chi_se, "truncated_mass": s.end.truncated_mass}
                for s in self.stages]

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# achlab-stitch/1 columns={','.join(TABLE_COLUMNS)}\n")
        if header is not None:
            buf.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.table():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def stitch(rule: RuleSpec | str, t_target: float, samples: int = 200_000, ell: int | None = None,
           cap: int = DEFAULT_CAP, floor: float = 5e-3, gamma: float = 1.0, seed: int = 0,
           truncation_budget: float = 1e-3, chi_rse_budget: float = 0.05, max_stages: int = 10_000) -> StitchResult:
    """Chain stages from a point mass at 1 until ``t_target`` is covered or stages fall below ``floor``.

    Raises :class:`StitchAborted` if a stage's truncated mass exceeds
    ``truncation_budget`` or its mean has relative standard error above
    ``chi_rse_budget``.
    """
    spec = resolve(rule)
    ell = spec.ell if ell is None else ell
    spec = _size_rule(spec, ell)
    if t_target < 0:
        raise ValueError(f"t_target must be >= 0, got {t_target}")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    result = StitchResult(spec, ell, t_target, samples, cap, floor, gamma, seed)
    start = SizePmf.point_mass(1)
    chi_prev = 1.0
    t = 0.0
    j = 0
    while t < t_target:
        L = chi_prev + 1.0
        delta = stage_length(L, ell, gamma)
        if delta < floor:
            result.exhausted = True
            break
        if j >= max_stages:
            raise StitchAborted(f"reached max_stages={max_stages} at t={t:.6g}", result)
        j += 1
        est = estimate_rho(spec, start, delta, ell, samples, cap, seed, ("stitch", j))
        result.stages.append(Stage(j, t, delta, L, start, est))
        if est.truncated_mass > truncation_budget:
            raise StitchAborted(f"stage {j}: truncated mass {est.truncated_mass:.3g} exceeds budget "
                                f"{truncation_budget:.3g} (cap={cap})", result)
        if est.chi > 0 and est.chi_se / est.chi > chi_rse_budget:
            raise StitchAborted(f"stage {j}: relative error of the mean {est.chi_se / est.chi:.3g} exceeds "
                                f"budget {chi_rse_budget:.3g}", result)
        start = est.pmf.normalized()
        chi_prev = start.chi
        t += delta
    return result


def er_susceptibility(t: float) -> float:
    """Mean component size of the vertex-pair process started from isolated vertices, below ``t = 1/2``."""
    return 1.0 / (1.0 - 2.0 * t) if t < 0.5 else math.inf
