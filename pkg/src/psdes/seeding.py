"""Counter-based derivation of independent random streams from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def derive_rng(master_seed: int, *keys) -> np.random.Generator:
    """Return a generator whose stream depends only on ``master_seed`` and ``keys``.

    Keys may be ints or strings (strings are hashed with crc32), so the same
    logical coordinate (dataset name, replication, bootstrap, ...) always maps
    to the same stream regardless of execution order.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.default_rng(ss)


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))
