"""Sparse probability mass functions over component sizes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class SizePmf:
    """Distribution over sizes ``k >= 1`` with an explicit unassigned remainder.

    ``sum(probs) + remainder == 1``.  The remainder holds mass that could not
    be attributed to a size (truncated or pruned samples).
    """

    support: np.ndarray
    probs: np.ndarray
    remainder: float = 0.0
    tag: str | None = None
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if support.ndim != 1 or support.shape != probs.shape:
            raise ValueError("support and probs must be 1-d arrays of equal length")
        if support.size == 0:
            raise ValueError("empty support")
        if np.any(support < 1):
            raise ValueError("sizes must be >= 1")
        if np.any(probs < 0) or self.remainder < 0:
            raise ValueError("probabilities must be non-negative")
        order = np.argsort(support)
        support, probs = support[order], probs[order]
        if np.any(np.diff(support) == 0):
            raise ValueError("repeated size in support")
        total = float(probs.sum()) + self.remainder
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SizePmf):
            return NotImplemented
        return (np.array_equal(self.support, other.support) and np.array_equal(self.probs, other.probs)
                and self.remainder == other.remainder and self.tag == other.tag)

    __hash__ = None

    @classmethod
    def from_dict(cls, probs: Mapping[int, float], remainder: float = 0.0, tag: str | None = None) -> SizePmf:
        items = sorted((int(k), float(p)) for k, p in probs.items() if p > 0)
        if not items:
            raise ValueError("empty support")
        k, p = zip(*items)
        return cls(np.array(k), np.array(p), remainder, tag)

    @classmethod
    def point_mass(cls, k: int = 1) -> SizePmf:
        return cls(np.array([k]), np.array([1.0]), 0.0, f"delta_{k}")

    @classmethod
    def from_counts(cls, sizes: np.ndarray, total: int, tag: str | None = None) -> SizePmf:
        """Empirical law of ``sizes`` among ``total`` trials; missing trials go to the remainder."""
        ks, counts = np.unique(np.asarray(sizes, dtype=np.int64), return_counts=True)
        probs = counts / total
        return cls(ks, probs, max(0.0, 1.0 - float(counts.sum()) / total), tag)

    @property
    def mass(self) -> float:
        return float(self._cdf[-1])

    def __getitem__(self, k: int) -> float:
        i = np.searchsorted(self.support, k)
        if i < self.support.size and self.support[i] == k:
            return float(self.probs[i])
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support.tolist(), self.probs.tolist()))

    @property
    def chi(self) -> float:
        """Mean size ``sum_k k p(k)`` over the assigned mass."""
        return float(np.dot(self.support, self.probs))

    def normalized(self) -> SizePmf:
        """Drop the remainder and rescale the assigned mass to one."""
        if self.remainder == 0:
            return self
        return SizePmf(self.support, self.probs / self.mass, 0.0, self.tag)

    def prune(self, threshold: float) -> SizePmf:
        """Move every probability below ``threshold`` into the remainder."""
        keep = self.probs >= threshold
        if keep.all():
            return self
        if not keep.any():
            raise ValueError("pruning would remove the whole support")
        dropped = float(self.probs[~keep].sum())
        return SizePmf(self.support[keep], self.probs[keep], self.remainder + dropped, self.tag)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from the normalized distribution."""
        u = rng.random(size) * self._cdf[-1]
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, self.support.size - 1)
        return self.support[idx] if size is not None else int(self.support[idx])

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(support, cdf)`` for the compiled samplers."""
        return self.support, self._cdf

    def total_variation(self, other: Mapping[int, float] | SizePmf) -> float:
        mine = self.as_dict()
        theirs = other.as_dict() if isinstance(other, SizePmf) else dict(other)
        keys = set(mine) | set(theirs)
        return 0.5 * sum(abs(mine.get(k, 0.0) - theirs.get(k, 0.0)) for k in keys)

    def to_dict(self) -> dict:
        out = {"pmf": {str(k): p for k, p in self.as_dict().items()}, "remainder": self.remainder}
        if self.tag is not None:
            out["tag"] = self.tag
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> SizePmf:
        data = json.loads(text)
        if "pmf" not in data:
            return cls.from_dict({int(k): v for k, v in data.items()})
        return cls.from_dict({int(k): v for k, v in data["pmf"].items()}, data.get("remainder", 0.0), data.get("tag"))


def borel_pmf(k: int, t: float) -> float:
    """Cluster-size law of the Poisson(2t) Galton-Watson tree: ``(2tk)^(k-1) e^(-2tk) / k!``."""
    if k < 1:
        return 0.0
    mu = 2.0 * t
    if mu == 0:
        return 1.0 if k == 1 else 0.0
    return math.exp((k - 1) * math.log(mu * k) - mu * k - math.lgamma(k + 1))


def borel(t: float, k_max: int) -> SizePmf:
    """Borel law truncated at ``k_max``, the tail mass sitting in the remainder."""
    ks = np.arange(1, k_max + 1)
    probs = np.array([borel_pmf(int(k), t) for k in ks])
    return SizePmf(ks, probs, max(0.0, 1.0 - float(probs.sum())), f"borel_{t:g}")
