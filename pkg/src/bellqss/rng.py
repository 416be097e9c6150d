"""Counter-based splitting of one master seed into independent random streams."""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    # stable across interpreter runs, unlike hash()
    return int.from_bytes(str(part).encode(), "little") & _MASK64


class Streams:
    """Named sub-streams of a master seed.

    ``streams.get("Alice")`` and ``streams.get("nature", 7)`` are independent
    Philox generators keyed by the path; requesting the same path twice
    returns the same (advancing) generator.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._cache: dict[tuple, np.random.Generator] = {}

    def get(self, *path) -> np.random.Generator:
        key = tuple(_key(p) for p in path)
        gen = self._cache.get(key)
        if gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=key)
            gen = np.random.Generator(np.random.Philox(ss))
            self._cache[key] = gen
        return gen


def trial_seed(master: int, trial: int) -> int:
    """64-bit sub-seed for trial ``trial``; independent of the total trial count."""
    ss = np.random.SeedSequence(int(master) & _MASK64, spawn_key=(0x7472, int(trial)))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
