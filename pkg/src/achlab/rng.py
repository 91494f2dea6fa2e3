"""Seeded, splittable random streams.

Every random quantity is drawn from a Philox stream keyed by ``(seed, *key)``.
Replicas and sub-tasks therefore never share generator state and can run in
any order (or in different processes) without changing results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_int(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"stream key parts must be non-negative, got {part}")
    return part


def seed_sequence(seed: int, *key: int | str) -> np.random.SeedSequence:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key_int(k) for k in key))


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def kernel_seed(seed: int, *key: int | str) -> int:
    """32-bit seed for the generator used inside compiled kernels."""
    return int(seed_sequence(seed, *key).generate_state(1, np.uint32)[0])


def derive_seed(seed: int, *key: int | str) -> int:
    """A 63-bit integer seed for a sub-task, usable as another run's ``seed``."""
    hi, lo = seed_sequence(seed, *key).generate_state(2, np.uint32)
    return ((int(hi) << 32) | int(lo)) >> 1
