"""Child-seed derivation.

``derive_seed(master, tag, index)`` is the first 8 bytes (little-endian) of
``sha256(f"{master}/{tag}/{index}")``. Every random stream in a run is
derived this way, so results do not depend on evaluation order.
"""
import hashlib

import numpy as np


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{int(master)}/{tag}/{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(master: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, tag, index))
