"""Deterministic, portable seed derivation.

Every run derives per-purpose integer seeds from one base seed by hashing the
base together with a label path (e.g. ("repeat", 2, "init")). SHA-256 keeps
the mapping identical across platforms and Python versions, and distinct
label paths give statistically independent streams: changing one derived
stream never perturbs another.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(base_seed: int, *path: object) -> int:
    """Map (base_seed, label path) to a 63-bit seed for numpy's default_rng."""
    text = ":".join([str(int(base_seed))] + [str(p) for p in path])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
