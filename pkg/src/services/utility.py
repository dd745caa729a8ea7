"""Downstream utility of privatized features on synthetic scenes."""

import math
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from ..config import config
from ..models.matching import RansacParams, SyntheticScene, UtilityMetrics
from ..models.privacy import LdpConfig
from ..utils.exceptions import InsufficientCandidates
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream
from .dictionary import nearest_many
from .ldp import bernoulli_p, privatize_image
from .matchers import Matcher
from .ransac import ransac_verify, transform_error

logger = get_logger(__name__)


def evaluate_scene(scene: SyntheticScene, cfg: LdpConfig, matcher: Matcher,
                   params: RansacParams, rng: np.random.Generator) -> Dict[str, Any]:
    """
    Privatize, match and verify one scene.

    Returns:
        Per-trial row: success flag, inlier fraction, correspondences and the
        number of query keypoints whose nearest word survived
    """
    words, _ = nearest_many(cfg.dictionary, scene.query_descriptors)
    with config.evaluation():
        features = privatize_image(scene.query_descriptors, scene.query_keypoints, cfg, rng)
    survived = int(sum(int(w) in set(f.indices.tolist()) for w, f in zip(words, features)))

    cands = matcher.match(scene, features, cfg.dictionary)
    success = False
    inlier_fraction = 0.0
    error = math.inf
    try:
        result = ransac_verify(cands, scene.model, params)
        inlier_fraction = len(result.inliers) / len(cands)
        error = transform_error(result.transform, scene.transform, scene.ref_keypoints)
        success = len(result.inliers) >= params.min_inliers and error < params.success_px
    except InsufficientCandidates as e:
        logger.debug(f"Scene skipped by RANSAC: {e}")

    return {
        'success': success,
        'inlier_fraction': inlier_fraction,
        'correspondences': len(cands),
        'survived': survived,
        'keypoints': scene.size,
        'transform_error': error,
    }


def utility_report(scenes: Union[SyntheticScene, Sequence[SyntheticScene]], cfg: LdpConfig,
                   matcher: Matcher, params: Optional[RansacParams] = None,
                   trials: Optional[int] = None, seed: int = 0) -> UtilityMetrics:
    """
    Success rate of transform recovery from privatized query features.

    Each trial privatizes a scene with its own stream, matches it, runs
    RANSAC and counts a success when the recovered transform maps the
    reference keypoints within params.success_px of the true transform.

    Args:
        scenes: One scene (reused every trial) or one scene per trial
        cfg: Mechanism settings
        matcher: Correspondence strategy
        params: RANSAC settings
        trials: Number of trials; defaults to the number of scenes
        seed: Master seed of the privatization streams

    Returns:
        Aggregated metrics, including the word survival rate and the rate
        Pr(u=1) it should track
    """
    params = params or RansacParams()
    if isinstance(scenes, SyntheticScene):
        scenes = [scenes]
    if not scenes:
        raise ValueError("utility_report needs at least one scene")
    trials = trials or len(scenes)

    rows = []
    for t in tqdm(range(trials), desc="utility", disable=not config.show_progress):
        scene = scenes[t % len(scenes)]
        row = evaluate_scene(scene, cfg, matcher, params, counter_stream(seed, t))
        rows.append(row)

    kept = sum(r['survived'] for r in rows)
    total = sum(r['keypoints'] for r in rows)
    p = bernoulli_p(cfg)
    metrics = UtilityMetrics(
        trials=trials,
        success_rate=float(np.mean([r['success'] for r in rows])),
        mean_inlier_fraction=float(np.mean([r['inlier_fraction'] for r in rows])),
        word_survival_rate=kept / total if total else 0.0,
        expected_survival=p,
        survival_sigma=math.sqrt(p * (1 - p) / total) if total else 0.0,
        mean_correspondences=float(np.mean([r['correspondences'] for r in rows])),
        params={'epsilon': cfg.epsilon, 'm': cfg.m, 'domain_size': cfg.domain_size,
                'matcher': matcher.get_matcher_name()},
    )
    logger.info(
        f"Utility eps={cfg.epsilon}, m={cfg.m}: success {metrics.success_rate:.3f}, "
        f"survival {metrics.word_survival_rate:.4f} (expected {p:.4f})"
    )
    return metrics
