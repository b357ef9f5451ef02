"""Deterministic per-feature random substreams.

Every randomized quantity in the pipeline (boundary decisions, CI endpoint
selection, tie splitting, per-fold p realizations) draws from a substream
keyed by (seed, labels...). Labels are hashed with blake2b, not Python's
salted hash, so streams are stable across processes and platforms and
independent of execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "uniform"]


def _label_key(labels: tuple[str, ...]) -> int:
    digest = hashlib.blake2b("\x1f".join(labels).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(seed: int, *labels: str) -> np.random.Generator:
    """A Generator for the given seed and label path, e.g. (feature, purpose)."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(_label_key(labels),))
    return np.random.Generator(np.random.Philox(ss))


def uniform(seed: int, *labels: str) -> float:
    """The first uniform draw of the labeled substream."""
    return float(substream(seed, *labels).random())
