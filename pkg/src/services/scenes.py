"""Synthetic planar scenes for utility measurements."""

import math
from typing import Optional, Tuple

import numpy as np

from ..models.matching import SyntheticScene, TransformModel
from ..utils.logging_config import get_logger
from ..utils.validators import as_matrix
from .ransac import apply_transform

logger = get_logger(__name__)

# outliers land at least this far from their true position
OUTLIER_MIN_PX = 10.0


def random_transform(model: TransformModel, rng: np.random.Generator,
                     image_size: Tuple[int, int] = (640, 480)) -> np.ndarray:
    """A moderate similarity or homography about the image centre."""
    width, height = image_size
    cx, cy = width / 2.0, height / 2.0
    scale = rng.uniform(0.8, 1.2)
    angle = rng.uniform(-math.pi / 6, math.pi / 6)
    tx, ty = rng.uniform(-0.1 * width, 0.1 * width), rng.uniform(-0.1 * height, 0.1 * height)
    c, s = scale * math.cos(angle), scale * math.sin(angle)
    to_centre = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=np.float64)
    back = np.array([[1, 0, cx + tx], [0, 1, cy + ty], [0, 0, 1]], dtype=np.float64)
    H = back @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]) @ to_centre
    if model is TransformModel.HOMOGRAPHY:
        perspective = np.eye(3)
        perspective[2, :2] = rng.uniform(-1e-4, 1e-4, size=2)
        H = H @ np.linalg.inv(to_centre) @ perspective @ to_centre
        H = H / H[2, 2]
    return H


def _displace(point: np.ndarray, rng: np.random.Generator, image_size: Tuple[int, int]) -> np.ndarray:
    width, height = image_size
    while True:
        candidate = rng.uniform((0.0, 0.0), (width, height))
        if np.linalg.norm(candidate - point) > OUTLIER_MIN_PX:
            return candidate


def make_scene(word_vectors, keypoints: int, model: TransformModel, rng: np.random.Generator,
               noise_px: float = 1.0, outlier_fraction: float = 0.0,
               descriptor_noise: float = 0.01, image_size: Tuple[int, int] = (640, 480),
               transform: Optional[np.ndarray] = None) -> SyntheticScene:
    """
    Build a planar scene observed by a reference and a query camera.

    Reference descriptors are perturbed copies of distinct rows of
    ``word_vectors`` (reused only when there are fewer rows than keypoints);
    query descriptors perturb them again. Query keypoints are the reference
    keypoints mapped through the transform plus Gaussian pixel noise, except
    for the outliers, which are moved more than 10 px away.

    Args:
        word_vectors: Row vectors descriptors are drawn around (usually the
            dictionary entries)
        keypoints: Number of keypoints
        model: Transform family of the scene
        rng: Scene generator stream
        noise_px: Standard deviation of the keypoint noise
        outlier_fraction: Fraction of query keypoints displaced, in [0, 1)
        descriptor_noise: Standard deviation of the descriptor noise
        image_size: (width, height)
        transform: Fixed transform instead of a random one

    Returns:
        The scene with its ground truth
    """
    if not 0.0 <= outlier_fraction < 1.0:
        raise ValueError(f"outlier_fraction must lie in [0, 1), got {outlier_fraction}")
    if keypoints < 1:
        raise ValueError("A scene needs at least one keypoint")
    words = as_matrix(word_vectors)
    width, height = image_size
    H = random_transform(model, rng, image_size) if transform is None else np.asarray(transform, dtype=np.float64)

    ref_kp = rng.uniform((0.0, 0.0), (width, height), size=(keypoints, 2))
    rows = rng.choice(words.shape[0], size=keypoints, replace=keypoints > words.shape[0])
    unit = np.all(np.isclose(np.linalg.norm(words, axis=1), 1.0))

    def perturb(base: np.ndarray) -> np.ndarray:
        noisy = base + rng.normal(0.0, descriptor_noise, size=base.shape) if descriptor_noise > 0 else base.copy()
        return noisy / np.linalg.norm(noisy, axis=1, keepdims=True) if unit else noisy

    ref_desc = perturb(words[rows])
    query_desc = perturb(ref_desc)

    query_kp = apply_transform(H, ref_kp)
    if noise_px > 0:
        query_kp = query_kp + rng.normal(0.0, noise_px, size=query_kp.shape)
    outliers = np.zeros(keypoints, dtype=bool)
    n_out = min(int(round(outlier_fraction * keypoints)), keypoints - 1)
    if n_out:
        chosen = rng.choice(keypoints, size=n_out, replace=False)
        outliers[chosen] = True
        for i in chosen:
            query_kp[i] = _displace(apply_transform(H, ref_kp[i:i + 1])[0], rng, image_size)

    return SyntheticScene(
        transform=H,
        model=model,
        ref_keypoints=ref_kp,
        ref_descriptors=ref_desc,
        query_keypoints=query_kp,
        query_descriptors=query_desc,
        outlier_mask=outliers,
        noise_px=noise_px,
        image_size=image_size,
    )
