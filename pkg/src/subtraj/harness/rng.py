"""Per-trial random substreams.

Trial ``i`` of a run with seed ``s`` draws from a Philox-4x64 counter-based
generator keyed by ``SeedSequence(s, spawn_key=(i,))``. The key depends only
on ``(s, i)``, so draws do not depend on which worker runs the trial or in
which order.
"""
import numpy as np


def substream(seed, trial) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


def substream_key(seed, trial):
    """128-bit Philox key words for (seed, trial), for logging."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(int(trial),))
    return [int(w) for w in ss.generate_state(2, dtype=np.uint64)]
