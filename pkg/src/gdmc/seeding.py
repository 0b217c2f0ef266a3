"""Deterministic RNG plumbing.

Every stochastic operation in the package takes an explicit integer seed and
builds its own counter-based Philox generator, so any piece of an experiment
can be replayed in isolation.  Derived seeds mix a base seed with integer
tags (component id, sweep cell, trial index) through ``SeedSequence``.
"""

import numpy as np

# component tags for derive_seed
GROUND = 1
MASK = 2
NOISE = 3
INIT = 4
PROBE = 5


def generator(seed):
    """Counter-based generator for the given seed."""
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(base_seed, *tags):
    """Deterministic child seed from a base seed and integer tags."""
    ss = np.random.SeedSequence((int(base_seed),) + tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0])
