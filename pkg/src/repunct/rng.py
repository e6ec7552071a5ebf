"""Counter-based random streams.

Every stochastic choice in the package draws from a Philox generator keyed
by (seed, purpose, *coords). Philox is counter-based, so the stream for a
given key is a pure function of the key: re-running epoch 7 draw 3 gives
the same window no matter what ran before it. That is what makes training
resumable and every experiment replayable from the manifest seed alone.

Purpose lanes keep independent uses of the same seed from colliding.
"""

from __future__ import annotations

import numpy as np

# Fixed purpose lanes. New uses must take a fresh constant, never reuse one.
SAMPLE = 0
DROPOUT = 1
INIT = 2
SHUFFLE = 3


def stream(seed: int, purpose: int, *coords: int) -> np.random.Generator:
    """Return a fresh Generator for the given (seed, purpose, coords) key.

    The key goes into the Philox counter, the seed into the Philox key, so
    streams for different coordinates are statistically independent.
    """
    counter = np.zeros(4, dtype=np.uint64)
    counter[0] = np.uint64(purpose)
    for i, c in enumerate(coords[:3]):
        counter[i + 1] = np.uint64(c)
    bits = np.random.Philox(key=np.uint64(seed), counter=counter)
    return np.random.Generator(bits)
