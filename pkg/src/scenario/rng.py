"""Named, seedable random streams.

Every stream is a counter-based Philox generator keyed by the root seed and
(hash(name), index). Streams never share state, so work split across threads
draws exactly the same numbers as a sequential run.
"""

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:4], "little")


class ScenarioRng:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)

    def stream(self, name: str, index: int = 0) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(stream_key(name), int(index)))
        return np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"ScenarioRng(seed={self.seed})"
