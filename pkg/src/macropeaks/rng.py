"""Counter-based random streams.

Every draw in the package goes through :func:`substream`, which keys a
Philox generator by ``(seed, replicate, block)``.  Replicates therefore do
not depend on execution order or on how many workers run them.
"""
import numpy as np


def substream(seed: int, replicate: int = 0, block: int = 0) -> np.random.Generator:
    if seed < 0 or replicate < 0 or block < 0:
        raise ValueError("seed, replicate and block must be nonnegative")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(block)))
    return np.random.Generator(np.random.Philox(seq))
