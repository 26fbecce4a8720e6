"""Splittable random streams.

Every stream is a numpy Generator built from
``SeedSequence(master, spawn_key=(family, replica, kind, neuron))``. A stream
depends only on its own key, so adding replicas or neurons never reshuffles
existing ones, and two runs sharing a key consume identical randomness.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

DRIVER = 0
SIGNAL = 1
INIT = 2
AUX = 3

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ParameterError(f"seed must lie in [0, 2**64 - 1], got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the given master seed and spawn key."""
    return np.random.default_rng(np.random.SeedSequence(check_seed(seed), spawn_key=tuple(key)))


@dataclass(frozen=True)
class ReplicaStreams:
    """Streams of one replica.

    `family` separates independent experiments that share a master seed, for
    example the two starting states of a total-variation comparison.
    """
    seed: int
    replica: int = 0
    family: int = 0

    def driver(self, neuron: int) -> np.random.Generator:
        return stream(self.seed, self.family, self.replica, DRIVER, neuron)

    def signals(self, neuron: int) -> np.random.Generator:
        return stream(self.seed, self.family, self.replica, SIGNAL, neuron)

    def init(self, neuron: int) -> np.random.Generator:
        return stream(self.seed, self.family, self.replica, INIT, neuron)

    def aux(self) -> np.random.Generator:
        return stream(self.seed, self.family, self.replica, AUX)
