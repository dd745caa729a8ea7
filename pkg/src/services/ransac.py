"""RANSAC geometric verification of 2D correspondences."""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.matching import Correspondence, RansacParams, RansacResult, TransformModel
from ..utils.exceptions import InsufficientCandidates
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream

logger = get_logger(__name__)


def apply_transform(H: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map (N, 2) points through a 3x3 transform; points at infinity become inf."""
    pts = np.asarray(points, dtype=np.float64)
    homog = np.hstack([pts, np.ones((pts.shape[0], 1))]) @ H.T
    w = homog[:, 2:3]
    with np.errstate(divide='ignore', invalid='ignore'):
        mapped = homog[:, :2] / w
    mapped[np.abs(w[:, 0]) < 1e-12] = np.inf
    return mapped


def fit_similarity(src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Least-squares similarity dst ~ s R src + t (exact for two points)."""
    if src.shape[0] < 2:
        return None
    rows = np.zeros((2 * src.shape[0], 4))
    rows[0::2] = np.column_stack([src[:, 0], -src[:, 1], np.ones(len(src)), np.zeros(len(src))])
    rows[1::2] = np.column_stack([src[:, 1], src[:, 0], np.zeros(len(src)), np.ones(len(src))])
    if np.linalg.matrix_rank(rows) < 4:
        return None
    (a, b, tx, ty), *_ = np.linalg.lstsq(rows, dst.reshape(-1), rcond=None)
    return np.array([[a, -b, tx], [b, a, ty], [0.0, 0.0, 1.0]])


def _normalizing_transform(points: np.ndarray) -> np.ndarray:
    centroid = points.mean(axis=0)
    spread = np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean()
    scale = np.sqrt(2.0) / spread if spread > 0 else 1.0
    return np.array([[scale, 0.0, -scale * centroid[0]],
                     [0.0, scale, -scale * centroid[1]],
                     [0.0, 0.0, 1.0]])


def fit_homography(src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Normalized DLT homography from four or more point pairs."""
    if src.shape[0] < 4:
        return None
    Ts, Td = _normalizing_transform(src), _normalizing_transform(dst)
    s = apply_transform(Ts, src)
    d = apply_transform(Td, dst)
    A = []
    for (x, y), (u, v) in zip(s, d):
        A.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        A.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, sv, vt = np.linalg.svd(np.asarray(A))
    if sv.size >= 8 and sv[7] < 1e-10 * sv[0]:
        return None
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if not np.all(np.isfinite(H)) or abs(H[2, 2]) < 1e-15:
        return None
    H = H / H[2, 2]
    if abs(np.linalg.det(H)) < 1e-12:
        return None
    return H


def fit_transform(model: TransformModel, src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    if model is TransformModel.SIMILARITY:
        return fit_similarity(src, dst)
    return fit_homography(src, dst)


def _canonical(cands: Sequence[Correspondence]) -> List[Correspondence]:
    return sorted(cands, key=lambda c: (c.query_index, c.ref_index,
                                        c.query_keypoint, c.ref_keypoint, c.score))


def _score(H: np.ndarray, src: np.ndarray, dst: np.ndarray, inlier_px: float) -> Tuple[np.ndarray, float]:
    errors = np.linalg.norm(apply_transform(H, src) - dst, axis=1)
    mask = errors < inlier_px
    rms = float(np.sqrt(np.mean(errors[mask] ** 2))) if mask.any() else np.inf
    return mask, rms


def ransac_verify(cands: Sequence[Correspondence], model: TransformModel,
                  params: Optional[RansacParams] = None) -> RansacResult:
    """
    Fit a 2D transform from reference to query keypoints with RANSAC.

    Candidates are put in a canonical order first, so the result depends
    only on the candidate set and params.seed. The best hypothesis has the
    most inliers, ties broken by lower inlier RMS; it is then refit on its
    inliers and the refit is kept when it does not lose inliers.

    Args:
        cands: Putative correspondences with keypoints
        model: Transform family
        params: Iterations, inlier threshold (pixels) and seed

    Returns:
        The best transform and its inliers

    Raises:
        InsufficientCandidates: If there are fewer candidates than a minimal sample
    """
    params = params or RansacParams()
    k = model.minimal_sample
    if len(cands) < k:
        raise InsufficientCandidates(
            f"{model.value} needs at least {k} correspondences, got {len(cands)}"
        )
    ordered = _canonical(cands)
    src = np.array([c.ref_keypoint for c in ordered], dtype=np.float64)
    dst = np.array([c.query_keypoint for c in ordered], dtype=np.float64)
    rng = counter_stream(params.seed)

    best_H = None
    best_mask = np.zeros(len(ordered), dtype=bool)
    best_rms = np.inf
    for _ in range(params.iters):
        sample = rng.choice(len(ordered), size=k, replace=False)
        H = fit_transform(model, src[sample], dst[sample])
        if H is None:
            continue
        mask, rms = _score(H, src, dst, params.inlier_px)
        count, best_count = int(mask.sum()), int(best_mask.sum())
        if best_H is None or count > best_count or (count == best_count and rms < best_rms):
            best_H, best_mask, best_rms = H, mask, rms

    if best_H is None:
        logger.warning(f"RANSAC found no non-degenerate {model.value} sample in {params.iters} iterations")
        return RansacResult(transform=np.eye(3), inliers=(), rms=np.inf, iterations=params.iters)

    if best_mask.sum() >= k:
        refit = fit_transform(model, src[best_mask], dst[best_mask])
        if refit is not None:
            mask, rms = _score(refit, src, dst, params.inlier_px)
            if mask.sum() >= best_mask.sum():
                best_H, best_mask, best_rms = refit, mask, rms

    inliers = tuple(sorted({(ordered[i].query_index, ordered[i].ref_index)
                            for i in np.flatnonzero(best_mask)}))
    logger.debug(f"RANSAC {model.value}: {len(inliers)}/{len(ordered)} inliers, rms={best_rms:.3f}")
    return RansacResult(transform=best_H, inliers=inliers, rms=best_rms, iterations=params.iters)


def transform_error(estimated: np.ndarray, truth: np.ndarray, points: np.ndarray) -> float:
    """Mean distance between the two transforms' images of ``points``."""
    return float(np.mean(np.linalg.norm(apply_transform(estimated, points) - apply_transform(truth, points), axis=1)))
