"""Named, independent RNG substreams derived from one master seed.

Each consumer (demand, tolerance, rejection, placement, driver trials,
policy randomness, agent init, exploration) gets its own stream so that
adding draws to one consumer never perturbs the others.
"""

from __future__ import annotations

import numpy as np


def substream(master_seed: int, *name) -> np.random.Generator:
    """Generator for the substream identified by `name` parts.

    Name parts may be strings or integers; the mapping is stable across
    runs and platforms.
    """
    entropy = [int(master_seed) & 0xFFFFFFFF]
    for part in name:
        if isinstance(part, str):
            entropy.extend(part.encode("utf-8"))
        else:
            entropy.append(int(part) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))
