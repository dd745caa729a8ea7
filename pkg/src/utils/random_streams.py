"""Random number streams.

Experiments use counter-based Philox streams keyed by a master seed and a
spawn key, so any trial can be replayed on its own. Privatization in
production uses the operating system's CSPRNG instead.
"""

import secrets
from typing import Optional, Union

import numpy as np

RandomSource = Union[np.random.Generator, "SecureStream"]


def counter_stream(seed: int, *keys: int) -> np.random.Generator:
    """
    Create a seeded counter-based generator.

    Args:
        seed: Master seed (any nonnegative integer)
        keys: Spawn key identifying the sub-stream (trial, stage, ...)

    Returns:
        A numpy Generator over the Philox bit generator
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from a generator, for libraries that want an int."""
    return int(rng.integers(0, 2**63 - 1))


class SecureStream:
    """CSPRNG-backed stream with the small Generator surface privatize uses."""

    def __init__(self) -> None:
        self._rng = secrets.SystemRandom()

    def random(self, size: Optional[int] = None):
        if size is None:
            return self._rng.random()
        return np.array([self._rng.random() for _ in range(size)])

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return self._rng.randrange(low, high)


def resolve_stream(rng: Optional[Union[RandomSource, int]]) -> RandomSource:
    """Turn None / int / generator into a usable random source."""
    if rng is None:
        return SecureStream()
    if isinstance(rng, (int, np.integer)):
        return counter_stream(int(rng))
    return rng
