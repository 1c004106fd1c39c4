"""Shared corpus builders for the test suite."""

import random

from roac0 import gen_random_read_once


def random_corpus(count, n_max, d_max, seed, n_min=2):
    """Deterministic list of random read-once circuits.

    Sizes are drawn in [n_min, n_max] and target depths in [1, d_max],
    all from one master seed, so any test naming (count, n_max, d_max,
    seed) pins down the exact circuits.
    """
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(n_min, n_max)
        d = rng.randint(1, d_max)
        out.append(gen_random_read_once(n, d, seed=rng.randrange(2**32)))
    return out
