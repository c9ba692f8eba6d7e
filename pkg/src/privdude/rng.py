"""Purpose-keyed random streams derived from one master seed.

Every random draw in a solve comes from a generator keyed by
``(purpose, *indices)``, so the value of a draw never depends on how many
other draws happened before it or on which worker made them.
"""
from __future__ import annotations

import zlib

import numpy as np


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


class Streams:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)

    def generator(self, purpose: str, *indices: int) -> np.random.Generator:
        key = (_purpose_code(purpose),) + tuple(int(i) for i in indices)
        seq = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))

    def derive_seed(self, purpose: str, *indices: int) -> int:
        key = (_purpose_code(purpose),) + tuple(int(i) for i in indices)
        seq = np.random.SeedSequence(self.seed, spawn_key=key)
        return int(seq.generate_state(1, dtype=np.uint32)[0])

    def __repr__(self):
        return f"Streams(seed={self.seed})"
