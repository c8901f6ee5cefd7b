"""Counter-based seed derivation.

One master seed expands into independent substreams addressed by integer
paths (stream tag, round, client id, ...). Derivation is stateless, so the
stream a consumer sees never depends on execution order or on which other
streams were drawn first.
"""

import numpy as np

# Stream tags. Fixed constants; changing them changes every derived stream.
STREAM_CENTERS = 0
STREAM_CLIENT_DATA = 1
STREAM_HOLDOUT = 2
STREAM_TRAIN = 3
STREAM_PARTICIPATION = 4


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for (master_seed, path)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(path)))


def derive_seed(master_seed: int, *path: int) -> int:
    """Collapse (master_seed, path) into a single integer seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])
