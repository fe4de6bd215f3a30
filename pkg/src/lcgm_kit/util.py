"""Shared plumbing: seeded RNG streams and optional thread parallelism."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
U = TypeVar("U")

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 generator; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def derive_rng(seed: int, *salts: int) -> np.random.Generator:
    """Deterministic per-component RNG stream.

    All randomness flows from a single master seed; sub-streams are derived
    by mixing the seed and salts through splitmix64, then used to key a
    PCG64 generator.  Stable across runs and platforms.
    """
    state = seed & _MASK
    for salt in salts:
        state ^= salt & _MASK
        state, _ = splitmix64(state)
    _, key = splitmix64(state)
    return np.random.default_rng(key)


def worker_count() -> int:
    """Worker cap from LCGM_THREADS; defaults to 1 (sequential, deterministic)."""
    raw = os.environ.get("LCGM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable[[T], U], items: Sequence[T]) -> list[U]:
    """Order-preserving map over independent work items.

    Runs sequentially unless LCGM_THREADS > 1.  Results are collected in
    input order, so outputs are identical either way.
    """
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
