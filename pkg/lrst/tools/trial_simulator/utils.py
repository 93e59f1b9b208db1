import numpy as np


def replicate_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Independent generator for one replicate, keyed by ``(seed, *stream)``. The same key always gives the
    same stream, whichever thread runs it.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *(int(s) for s in stream)]))
