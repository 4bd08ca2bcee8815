"""Counter-based random streams (Philox) so parallel replicates stay reproducible."""
import numpy as np


def make_rng(seed=None):
    """A Philox-backed Generator; passes an existing Generator through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(seed, n):
    """``n`` independent streams derived from one seed.

    Stream k is the same whatever ``n`` is, so results do not depend on how
    work is split across workers.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
