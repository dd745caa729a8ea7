"""Types of the omega-subset privacy mechanism."""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .descriptors import Dictionary


@dataclass(frozen=True)
class LdpConfig:
    """Settings for LDP-Feat privatization.

    ``epsilon=math.inf`` is the unbounded flag: the nearest word is always
    reported; epsilon=0 makes every output distribution identical.
    ``domain_size_override`` may replace the dictionary for purely symbolic
    computations (for instance the full uint8 descriptor space, 2**1024).
    """

    epsilon: float
    m: int
    dictionary: Optional[Dictionary] = None
    rng_seed: Optional[int] = None
    domain_size_override: Optional[int] = None

    def __post_init__(self) -> None:
        if math.isnan(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.m < 1:
            raise ValueError(f"subset size m must be >= 1, got {self.m}")
        if self.dictionary is None and self.domain_size_override is None:
            raise ValueError("LdpConfig needs a dictionary or a domain size")
        if self.domain_size < self.m:
            raise ValueError(f"subset size m={self.m} exceeds domain size {self.domain_size}")

    @property
    def domain_size(self) -> int:
        if self.domain_size_override is not None:
            return int(self.domain_size_override)
        return self.dictionary.size

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.epsilon)

    @property
    def full_domain(self) -> bool:
        """The mechanism reports the whole domain (m = |K|)."""
        return self.m == self.domain_size


@dataclass(frozen=True, eq=False)
class PrivatizedFeature:
    """A keypoint plus the m dictionary indices reported for it."""

    indices: np.ndarray
    keypoint: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.ndim != 1 or indices.size == 0:
            raise ValueError("A privatized feature reports a nonempty index set")
        if np.unique(indices).size != indices.size:
            raise ValueError("Reported indices must be distinct")
        if np.any(indices < 0):
            raise ValueError("Reported indices must be nonnegative")
        indices = np.sort(indices)
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrivatizedFeature):
            return NotImplemented
        same_kp = (
            (self.keypoint is None and other.keypoint is None)
            or (self.keypoint is not None and other.keypoint is not None
                and np.allclose(self.keypoint, other.keypoint, equal_nan=True))
        )
        return same_kp and np.array_equal(self.indices, other.indices)

    __hash__ = object.__hash__


@dataclass
class LdpVerdict:
    """Outcome of an empirical epsilon-LDP check."""

    passed: bool
    worst_ratio: float
    bound: float
    slack: float
    max_total_variation: float
    scenario_ratios: Dict[str, float] = field(default_factory=dict)
    scenario_passed: bool = True
    cells: int = 0
    trials: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            'passed': self.passed,
            'worst_ratio': self.worst_ratio,
            'bound': self.bound,
            'slack': self.slack,
            'max_total_variation': self.max_total_variation,
            'scenario_ratios': dict(self.scenario_ratios),
            'scenario_passed': self.scenario_passed,
            'cells': self.cells,
            'trials': self.trials,
        }
