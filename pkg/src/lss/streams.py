"""Deterministic random-stream derivation for reproducible parallel runs.

Every trajectory draws from its own counter-based Philox streams, derived
from (master seed, experiment tag, trajectory index).  Results are
therefore identical however trajectories are batched or scheduled; the
ensemble reduction only has to preserve index order.

Per trajectory there are three substreams: the switching path, the primary
Wiener increments, and an optional secondary Wiener stream (independent
pair member).  Tags are hashed with blake2s so the derivation is stable
across processes and platforms (Python's builtin hash is salted).
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["tag_key", "substream", "trajectory_streams", "PATH_SUB", "NOISE_SUB", "NOISE2_SUB"]

PATH_SUB = 0
NOISE_SUB = 1
NOISE2_SUB = 2


def tag_key(tag: str) -> int:
    """Stable 64-bit key for an experiment tag."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, tag: str, index: int, sub: int) -> np.random.Generator:
    """Philox generator for (seed, tag, trajectory index, substream id)."""
    ss = np.random.SeedSequence(seed, spawn_key=(tag_key(tag), index, sub))
    return np.random.Generator(np.random.Philox(ss))


def trajectory_streams(seed: int, tag: str, index: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(path, noise, secondary-noise) streams for one trajectory."""
    return (
        substream(seed, tag, index, PATH_SUB),
        substream(seed, tag, index, NOISE_SUB),
        substream(seed, tag, index, NOISE2_SUB),
    )
