"""Deterministic per-component RNG derivation from a single root seed."""

import zlib

import numpy as np


def rng_for(root_seed: int, *labels: str) -> np.random.Generator:
    """Derive an independent generator for a named component.

    Every piece of randomness in the package flows through here, so two runs
    with the same root seed are reproducible regardless of call order.
    """
    entropy = [int(root_seed) & 0xFFFFFFFF]
    for label in labels:
        entropy.append(zlib.crc32(label.encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))
