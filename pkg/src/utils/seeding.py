"""
64-bit seed derivation.

Every random stream in the pipeline is derived from the single config `seed`
through `derive_seed(master, *labels)`, so sample generation and training
runs are independent of execution order.
"""
import zlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _label_value(label: Union[int, str]) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label) & MASK64


def derive_seed(master: int, *labels: Union[int, str]) -> int:
    """Fold labels (ints or strings) into a master seed; returns an unsigned 64-bit int."""
    h = splitmix64(int(master) & MASK64)
    for label in labels:
        h = splitmix64(h ^ _label_value(label))
    return h


def make_rng(master: int, *labels: Union[int, str]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
