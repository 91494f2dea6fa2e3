"""Monte Carlo estimates of the root-component size law of the exploration process."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..rng import kernel_seed, stream
from ..rules import RuleSpec
from ._bp_kernels import sample_root_sizes
from .pmf import SizePmf
from .tree import ROOT, TUPLE, _size_rule, reconstruct, replay, sample_bp

CHUNK = 1 << 16
DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class RhoEstimate:
    """Empirical law of the root component size at one time.

    ``pmf`` assigns ``count_k / samples`` to each observed size; truncated and
    degenerate samples go to its remainder, so
    ``sum(pmf) + truncated_mass + degenerate_mass == 1``.
    """

    t: float
    samples: int
    pmf: SizePmf
    truncated_mass: float
    degenerate_mass: float
    chi: float
    chi_se: float

    def stderr(self, k: int) -> float:
        p = self.pmf[k]
        return math.sqrt(max(p * (1.0 - p), 1.0 / self.samples**2) / self.samples)

    def interval(self, k: int, z: float = 1.96) -> tuple[float, float]:
        p, se = self.pmf[k], self.stderr(k)
        return max(0.0, p - z * se), min(1.0, p + z * se)


def _summarize(t: float, sizes: np.ndarray, samples: int) -> RhoEstimate:
    good = sizes[sizes > 0]
    truncated = int(np.count_nonzero(sizes < 0))
    degenerate = int(np.count_nonzero(sizes == 0))
    pmf = SizePmf.from_counts(good, samples)
    if good.size:
        chi = float(good.sum()) / samples
        # standard error of the mean of size * indicator(valid)
        second = float(np.dot(good.astype(np.float64), good)) / samples
        chi_se = math.sqrt(max(second - chi * chi, 0.0) / samples)
    else:
        chi, chi_se = 0.0, 0.0
    return RhoEstimate(t, samples, pmf, truncated / samples, degenerate / samples, chi, chi_se)


def _compiled_sizes(rule: RuleSpec, phi: SizePmf, grid: np.ndarray, ell: int, samples: int,
                    cap: int, seed: int, key: tuple) -> np.ndarray:
    code, p1 = rule.kernel
    support, cdf = phi.arrays()
    out = np.empty((samples, grid.size), dtype=np.int64)
    for chunk, lo in enumerate(range(0, samples, CHUNK)):
        hi = min(samples, lo + CHUNK)
        sample_root_sizes(support, cdf, grid, ell, cap, code, p1, hi - lo,
                          kernel_seed(seed, *key, chunk), out[lo:hi])
    return out


def _python_sizes(rule: RuleSpec, phi: SizePmf, grid: np.ndarray, ell: int, samples: int,
                  cap: int, seed: int, key: tuple) -> np.ndarray:
    rng = stream(seed, *key, "python")
    t_max = float(grid[-1])
    out = np.empty((samples, grid.size), dtype=np.int64)
    for s in range(samples):
        tree = sample_bp(phi, t_max, ell, cap, rng)
        if tree.truncated:
            out[s] = -1
            continue
        rec = reconstruct(tree)
        if rec.degenerate:
            out[s] = 0
            continue
        # a tuple survives thinning to time g when it and all its ancestor tuples arrived by g
        eff = np.where(tree.kind == TUPLE, tree.time, 0.0)
        for i in range(1, len(tree)):
            if tree.kind[i] != ROOT:
                eff[i] = max(eff[i], eff[tree.parent[i]])
        tuple_eff = eff[tree.kind == TUPLE]
        by_time = np.argsort(rec.times, kind="stable")
        for g, t in enumerate(grid):
            order = by_time[tuple_eff[by_time] <= t]
            out[s, g] = replay(rule, rec.tuples, rec.sizes, order, rng)
    return out


def estimate_rho(rule: RuleSpec | str, phi: SizePmf, t: float | Sequence[float], ell: int | None = None,
                 samples: int = 100_000, cap: int = DEFAULT_CAP, seed: int = 0, key: tuple = ("rho",),
                 compiled: bool = True) -> RhoEstimate | list[RhoEstimate]:
    """Estimate the law of the root component size at time ``t`` from seed law ``phi``.

    With a sequence of times, one set of ``samples`` trees is drawn at the
    largest time and thinned to every requested time; a list is returned.
    """
    from ..rules import resolve

    spec = resolve(rule)
    ell = spec.ell if ell is None else ell
    spec = _size_rule(spec, ell)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    order = np.argsort(times, kind="stable")
    grid = times[order]
    phi = phi.normalized()
    if compiled and spec.kernel is not None:
        sizes = _compiled_sizes(spec, phi, grid, ell, samples, cap, seed, key)
    else:
        sizes = _python_sizes(spec, phi, grid, ell, samples, cap, seed, key)
    estimates = [None] * grid.size
    for g, idx in enumerate(order):
        estimates[idx] = _summarize(float(grid[g]), sizes[:, g], samples)
    return estimates if np.ndim(t) else estimates[0]
