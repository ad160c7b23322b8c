"""Deterministic stream derivation from one base seed.

Every random draw in the lab flows from a 64-bit base seed through
``stream(base, *labels)``: labels (component names, sizes, replication
indices) are hashed into a SeedSequence spawn key, so replications get
independent streams whose identity does not depend on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def spawn_key(*labels):
    return tuple(_label_key(l) for l in labels)


def stream(base_seed: int, *labels) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=spawn_key(*labels))
    return np.random.default_rng(seq)


def kernel_seed(base_seed: int, *labels) -> int:
    """32-bit seed for the in-kernel generator, derived from the same scheme."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=spawn_key(*labels))
    return int(seq.generate_state(1, dtype=np.uint32)[0])
