"""Hierarchical, order-independent random seed derivation.

Every stochastic phase of the pipeline derives its generator from a root
seed plus a path of labels (phase name, group index, query index, ...).
Two derivations with the same root and path always produce the same
stream, regardless of how many other streams were consumed in between,
so results do not depend on scheduling or evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK63 = (1 << 63) - 1


def _encode(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & _MASK63


def rng_for(root: int, *path: int | str) -> np.random.Generator:
    """Generator for the stream identified by (root, *path)."""
    entropy = [_encode(root)] + [_encode(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(root: int, *path: int | str) -> int:
    """Integer sub-seed for (root, *path), usable as a new root."""
    entropy = [_encode(root)] + [_encode(p) for p in path]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1] >> 1)


def content_rng(root: int, *arrays: np.ndarray | None) -> np.random.Generator:
    """Generator keyed by the byte content of the given arrays.

    Used for per-item noise draws inside batched losses: the draw
    depends only on (root, item content), so duplicating an item in a
    batch reuses the same draw and leaves a batch-mean loss unchanged.
    """
    entropy = [_encode(root)]
    for arr in arrays:
        if arr is None:
            entropy.append(0)
        else:
            entropy.append(zlib.crc32(np.ascontiguousarray(arr, dtype=np.float64).tobytes()))
    return np.random.default_rng(np.random.SeedSequence(entropy))
