"""Seed plumbing: every random stream is derived from a root seed by name."""
import hashlib

import numpy as np


def derive_seed(root: int, *names) -> int:
    """Stable 63-bit child seed for ``root`` and a path of names/ints."""
    key = "/".join([str(int(root))] + [str(n) for n in names]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; used for per-tree streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))
