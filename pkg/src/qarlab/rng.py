"""Seed derivation for reproducible, order-independent parallel streams.

The package-wide generator is numpy's PCG64 (``numpy.random.default_rng``).
Substreams are derived as ``seed XOR splitmix64(index)`` so that replication
``r`` of an experiment always sees the same stream regardless of execution
order or worker count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit hash with good avalanche."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, index: int) -> int:
    """Seed for substream ``index`` of a master seed: ``master ^ splitmix64(index)``."""
    if not 0 <= master < 1 << 64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master}")
    if index < 0:
        raise ValueError(f"substream index must be nonnegative, got {index}")
    return (master ^ splitmix64(index)) & _MASK64


def generator(seed: int) -> np.random.Generator:
    """The package-wide PCG64 generator for a given seed."""
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(seed)
