"""Correspondence search between query and reference keypoints."""

from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..models.descriptors import AffineSubspace, Dictionary
from ..models.matching import Correspondence, CorrespondenceSource
from ..models.privacy import PrivatizedFeature
from ..utils.logging_config import get_logger
from ..utils.validators import as_matrix, validate_dimension
from .dictionary import nearest_many
from .geometry import distances_to_subspace, subspace_to_subspace_dist

logger = get_logger(__name__)

DEFAULT_RATIO = 0.8

_NO_KEYPOINT = (float('nan'), float('nan'))


def _keypoint(keypoints, i: int) -> Tuple[float, float]:
    if keypoints is None:
        return _NO_KEYPOINT
    x, y = keypoints[i]
    return float(x), float(y)


def match_mutual_nn(query_descs, ref_descs, query_keypoints=None, ref_keypoints=None,
                    source: CorrespondenceSource = CorrespondenceSource.RAW) -> List[Correspondence]:
    """
    Mutual nearest neighbors under L2.

    Pair (i, j) is kept when j is the nearest reference of query i and i the
    nearest query of reference j; ties go to the lowest index.

    Returns:
        Correspondences ordered by query index
    """
    queries = as_matrix(query_descs)
    refs = as_matrix(ref_descs)
    validate_dimension(refs.shape[1], queries.shape[1], "query descriptor")
    dists = cdist(queries, refs)
    best_ref = np.argmin(dists, axis=1)
    best_query = np.argmin(dists, axis=0)
    return [
        Correspondence(
            query_index=i,
            ref_index=int(j),
            query_keypoint=_keypoint(query_keypoints, i),
            ref_keypoint=_keypoint(ref_keypoints, int(j)),
            score=float(dists[i, j]),
            source=source,
        )
        for i, j in enumerate(best_ref)
        if best_query[j] == i
    ]


def match_mutual_nn_features(query: Sequence[PrivatizedFeature], ref_descs, dictionary: Dictionary,
                             ref_keypoints=None) -> List[Correspondence]:
    """
    Mutual nearest neighbors between reported words and raw references.

    Every reported word of every query feature stands in for that keypoint,
    so a keypoint whose true word was not reported can only be matched
    through a random word.

    Returns:
        Correspondences ordered by query index, one per matched reference
    """
    owners = []
    words = []
    for i, feature in enumerate(query):
        if feature.indices.size and feature.indices[-1] >= dictionary.size:
            raise ValueError(f"Query feature {i} reports an index outside the dictionary")
        owners.extend([i] * feature.m)
        words.extend(int(w) for w in feature.indices)
    if not words:
        return []
    pairs = match_mutual_nn(dictionary.vectors()[words], ref_descs, ref_keypoints=ref_keypoints,
                            source=CorrespondenceSource.LDP)
    matches = []
    for pair in pairs:
        owner = owners[pair.query_index]
        keypoint = query[owner].keypoint
        matches.append(Correspondence(
            query_index=owner,
            ref_index=pair.ref_index,
            query_keypoint=keypoint if keypoint is not None else _NO_KEYPOINT,
            ref_keypoint=pair.ref_keypoint,
            score=pair.score,
            source=CorrespondenceSource.LDP,
        ))
    logger.debug(f"Mutual NN over reported words: {len(words)} words -> {len(matches)} correspondences")
    return matches


def match_vocabulary(query: Sequence[PrivatizedFeature], ref_descs, dictionary: Dictionary,
                     ref_keypoints=None) -> List[Correspondence]:
    """
    Match privatized query keypoints through shared dictionary words.

    Each reference descriptor is quantized to its nearest word; a query
    matches every reference whose word is among its reported m words. All
    collisions are emitted and left to geometric verification.

    Args:
        query: Privatized query features
        ref_descs: Raw reference descriptors
        dictionary: The dictionary the query was privatized against
        ref_keypoints: Reference keypoint positions

    Returns:
        Correspondences scored 1 / shared words, ordered by (query, ref)
    """
    ref_words, _ = nearest_many(dictionary, ref_descs)
    holders: Dict[int, List[int]] = defaultdict(list)
    for j, word in enumerate(ref_words):
        holders[int(word)].append(j)

    matches = []
    for i, feature in enumerate(query):
        if feature.indices.size and feature.indices[-1] >= dictionary.size:
            raise ValueError(f"Query feature {i} reports an index outside the dictionary")
        shared: Dict[int, int] = defaultdict(int)
        for word in feature.indices:
            for j in holders.get(int(word), ()):
                shared[j] += 1
        for j in sorted(shared):
            matches.append(Correspondence(
                query_index=i,
                ref_index=j,
                query_keypoint=feature.keypoint if feature.keypoint is not None else _NO_KEYPOINT,
                ref_keypoint=_keypoint(ref_keypoints, j),
                score=1.0 / shared[j],
                source=CorrespondenceSource.LDP,
            ))
    logger.debug(f"Vocabulary matching: {len(query)} queries -> {len(matches)} correspondences")
    return matches


def _ratio_test(dists: np.ndarray, ratio: float) -> Optional[int]:
    """Index of the best candidate if it passes best < ratio * second."""
    if dists.size == 0 or ratio <= 0:
        return None
    order = np.argsort(dists, kind='stable')
    if order.size == 1:
        return int(order[0])
    if dists[order[0]] < ratio * dists[order[1]]:
        return int(order[0])
    return None


def match_point_to_subspace(raw_refs, lifted_queries: Sequence[AffineSubspace],
                            ratio: float = DEFAULT_RATIO, query_keypoints=None,
                            ref_keypoints=None) -> List[Correspondence]:
    """
    Match lifted queries to raw reference descriptors.

    Each query subspace takes its nearest reference under point-to-subspace
    distance if it passes the ratio test; ratio=0 rejects everything.
    """
    refs = as_matrix(raw_refs)
    matches = []
    for i, subspace in enumerate(lifted_queries):
        dists = distances_to_subspace(subspace, refs)
        j = _ratio_test(dists, ratio)
        if j is None:
            continue
        matches.append(Correspondence(
            query_index=i,
            ref_index=j,
            query_keypoint=_keypoint(query_keypoints, i),
            ref_keypoint=_keypoint(ref_keypoints, j),
            score=float(dists[j]),
            source=CorrespondenceSource.LIFTED,
        ))
    return matches


def match_subspace_to_subspace(lifted_refs: Sequence[AffineSubspace],
                               lifted_queries: Sequence[AffineSubspace],
                               ratio: float = DEFAULT_RATIO, query_keypoints=None,
                               ref_keypoints=None) -> List[Correspondence]:
    """Lifted-to-lifted matching under subspace-to-subspace distance."""
    matches = []
    for i, query in enumerate(lifted_queries):
        dists = np.array([subspace_to_subspace_dist(query, ref) for ref in lifted_refs])
        j = _ratio_test(dists, ratio)
        if j is None:
            continue
        matches.append(Correspondence(
            query_index=i,
            ref_index=j,
            query_keypoint=_keypoint(query_keypoints, i),
            ref_keypoint=_keypoint(ref_keypoints, j),
            score=float(dists[j]),
            source=CorrespondenceSource.LIFTED,
        ))
    return matches
