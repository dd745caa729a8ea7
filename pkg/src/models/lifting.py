"""Lifting configuration and records."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .descriptors import AffineSubspace, Dictionary


@dataclass(frozen=True)
class LiftingConfig:
    """Hybrid adversarial lifting settings.

    Half of the m directions come from database samples, half from uniform
    noise. ``partitions`` > 1 enables sub-hybrid lifting, where every lift
    draws its database samples from one sub-database.
    """

    m: int
    database: Dictionary
    rng_seed: int = 0
    value_range: Tuple[float, float] = (-1.0, 1.0)
    partitions: int = 1

    def __post_init__(self) -> None:
        if self.m < 2 or self.m % 2:
            raise ValueError(f"Lifting dimension m must be even and >= 2, got {self.m}")
        if self.m >= self.database.n:
            raise ValueError(f"Lifting dimension m={self.m} must be below descriptor dimension {self.database.n}")
        low, high = self.value_range
        if not low < high:
            raise ValueError(f"Invalid value range {self.value_range}")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")

    @property
    def half(self) -> int:
        return self.m // 2


@dataclass(frozen=True, eq=False)
class LiftingRecord:
    """A lifted subspace plus the ground truth kept locally for evaluation."""

    subspace: AffineSubspace
    adversarial_indices: List[int] = field(default_factory=list)
    original: Optional[np.ndarray] = None
    dropped_directions: int = 0
