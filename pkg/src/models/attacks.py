"""Attack configurations and estimates."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .descriptors import AffineSubspace, Dictionary


@dataclass(frozen=True)
class DatabaseAttackConfig:
    """The attacker holds the exact lifting database W."""

    database: Dictionary
    m: int
    V_size: int = 64
    U_size: int = 8
    zero_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.m < 2 or self.m % 2:
            raise ValueError(f"Lifting dimension m must be even and >= 2, got {self.m}")
        if not 0 < self.U_size <= self.V_size:
            raise ValueError(f"Need 0 < U_size <= V_size, got {self.U_size}, {self.V_size}")


@dataclass(frozen=True)
class ClusterAttackConfig:
    """The attacker holds a public proxy database and auxiliary subspaces Q."""

    public_db: Dictionary
    aux_subspaces: Tuple[AffineSubspace, ...]
    m: int
    V_size: int = 64
    intersection_tol: float = 1e-4
    collision_radius: Optional[float] = None
    seed: int = 0
    kmeans_iters: int = 50

    def __post_init__(self) -> None:
        if not self.aux_subspaces:
            raise ValueError("Cluster attack needs at least one auxiliary subspace")
        if self.m < 2 or self.m % 2:
            raise ValueError(f"Lifting dimension m must be even and >= 2, got {self.m}")
        if self.V_size < self.k:
            raise ValueError(f"V_size={self.V_size} must be at least k={self.k}")
        object.__setattr__(self, "aux_subspaces", tuple(self.aux_subspaces))

    @property
    def k(self) -> int:
        """Number of candidate clusters, m/2 + 1."""
        return self.m // 2 + 1

    @property
    def radius(self) -> float:
        return self.intersection_tol if self.collision_radius is None else self.collision_radius


@dataclass
class AttackEstimate:
    """Recovered descriptors for one attacked subspace.

    ``candidate_scores`` holds (candidate vector, score) pairs; for the
    database attack ``recovered_indices`` are the database indices taken as
    adversarial descriptors.
    """

    d_hat: np.ndarray
    adversarial_hats: List[np.ndarray]
    candidate_scores: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    recovered_indices: List[int] = field(default_factory=list)
    intersecting_aux: List[int] = field(default_factory=list)
    elapsed_s: float = 0.0

    def to_record(self, subspace_id: Any = None) -> Dict[str, Any]:
        """JSON-friendly attack report row."""
        return {
            'subspace_id': subspace_id,
            'candidate_scores': [float(score) for _, score in self.candidate_scores],
            'recovered_indices': [int(i) for i in self.recovered_indices],
            'intersecting_aux': [int(i) for i in self.intersecting_aux],
            'timing_s': self.elapsed_s,
        }


@dataclass
class RecoveryMetrics:
    """How close an attack estimate came to the concealed descriptor."""

    cosine: float
    l2_error: float
    exact_adversarial: Optional[bool] = None
