"""One run seed fans out into independent named sub-streams.

stream(seed, KIND, *keys) seeds a PCG64 generator from the entropy
(seed, KIND, *keys), so e.g. episode 3's traffic never shares draws with the
exploration noise or the replay sampler.
"""

import numpy as np

TRAFFIC = 0
INIT = 1
NOISE = 2
REPLAY = 3
BASELINE = 4


def stream(seed: int, kind: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), kind, *map(int, keys)]))
