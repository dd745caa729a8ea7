"""Correspondences, synthetic scenes and utility metrics."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np


class CorrespondenceSource(Enum):
    """What the query side of a correspondence was."""
    RAW = "raw"
    LIFTED = "lifted"
    LDP = "ldp"


class TransformModel(Enum):
    """2D transform family for geometric verification."""
    SIMILARITY = "similarity"
    HOMOGRAPHY = "homography"

    @property
    def minimal_sample(self) -> int:
        return 2 if self is TransformModel.SIMILARITY else 4


@dataclass(frozen=True)
class Correspondence:
    """A putative match between a query and a reference keypoint."""

    query_index: int
    ref_index: int
    query_keypoint: Tuple[float, float]
    ref_keypoint: Tuple[float, float]
    score: float
    source: CorrespondenceSource = CorrespondenceSource.RAW

    def __post_init__(self) -> None:
        if not self.score >= 0:
            raise ValueError(f"Correspondence score must be nonnegative, got {self.score}")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """A planar scene seen twice under a known 2D transform.

    Reference keypoints map to query keypoints through ``transform`` (plus
    noise); ``outlier_mask`` marks query keypoints displaced at random.
    """

    transform: np.ndarray
    model: TransformModel
    ref_keypoints: np.ndarray
    ref_descriptors: np.ndarray
    query_keypoints: np.ndarray
    query_descriptors: np.ndarray
    outlier_mask: np.ndarray
    noise_px: float = 0.0
    image_size: Tuple[int, int] = (640, 480)

    def __post_init__(self) -> None:
        transform = np.asarray(self.transform, dtype=np.float64)
        if transform.shape != (3, 3) or abs(np.linalg.det(transform)) < 1e-12:
            raise ValueError("Scene transform must be an invertible 3x3 matrix")
        if len(self.ref_keypoints) != len(self.query_keypoints):
            raise ValueError("Reference and query keypoints must pair up")
        fraction = float(np.mean(self.outlier_mask)) if len(self.outlier_mask) else 0.0
        if not 0.0 <= fraction < 1.0:
            raise ValueError("Outlier fraction must lie in [0, 1)")

    @property
    def size(self) -> int:
        return int(len(self.ref_keypoints))

    @property
    def inlier_indices(self) -> np.ndarray:
        return np.flatnonzero(~np.asarray(self.outlier_mask, dtype=bool))


@dataclass(frozen=True)
class RansacParams:
    """Geometric verification settings."""

    iters: int = 1000
    inlier_px: float = 3.0
    success_px: float = 5.0
    min_inliers: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iters < 1:
            raise ValueError(f"RANSAC needs at least one iteration, got {self.iters}")
        if self.inlier_px <= 0 or self.success_px <= 0:
            raise ValueError("Pixel thresholds must be positive")


@dataclass
class RansacResult:
    """Best transform and its inlier correspondences.

    ``inliers`` holds sorted (query_index, ref_index) pairs, so it does not
    depend on the order candidates were supplied in.
    """

    transform: np.ndarray
    inliers: Tuple[Tuple[int, int], ...]
    rms: float
    iterations: int


@dataclass
class UtilityMetrics:
    """Aggregated downstream-utility numbers over seeded scenes."""

    trials: int
    success_rate: float
    mean_inlier_fraction: float
    word_survival_rate: float
    expected_survival: float
    survival_sigma: float
    mean_correspondences: float
    params: Dict[str, Any] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = dict(self.params)
        row.update({
            'trials': self.trials,
            'success_rate': self.success_rate,
            'mean_inlier_fraction': self.mean_inlier_fraction,
            'word_survival_rate': self.word_survival_rate,
            'expected_survival': self.expected_survival,
            'survival_sigma': self.survival_sigma,
            'mean_correspondences': self.mean_correspondences,
        })
        return row
