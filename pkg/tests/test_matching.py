import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from src.models import CorrespondenceSource, LdpConfig, LiftingConfig, PrivatizedFeature
from src.services.dictionary import from_descriptors, nearest_many
from src.services.ldp import privatize
from src.services.lifting import lift
from src.services.matching import (
    match_mutual_nn,
    match_mutual_nn_features,
    match_point_to_subspace,
    match_subspace_to_subspace,
    match_vocabulary,
)
from src.utils import DimensionMismatch, counter_stream


def pairs(matches):
    return [(c.query_index, c.ref_index) for c in matches]


def test_mutual_nn_of_identical_sets(rng):
    descs = rng.normal(size=(20, 16))
    matches = match_mutual_nn(descs, descs)
    assert pairs(matches) == [(i, i) for i in range(20)]
    assert all(c.score == pytest.approx(0.0) for c in matches)
    assert all(c.source is CorrespondenceSource.RAW for c in matches)


def test_mutual_nn_finds_a_planted_pair(rng):
    refs = rng.normal(size=(10, 16)) * 10
    query = refs[3] + rng.normal(0.0, 0.01, size=16)
    matches = match_mutual_nn(query[None, :], refs, query_keypoints=[(4.0, 5.0)], ref_keypoints=[(0.0, 0.0)] * 10)
    assert pairs(matches) == [(0, 3)]
    assert matches[0].query_keypoint == (4.0, 5.0)


def test_mutual_nn_matches_brute_force(rng):
    queries, refs = rng.normal(size=(30, 8)), rng.normal(size=(40, 8))
    dists = cdist(queries, refs)
    expected = [
        (i, j) for i in range(30) for j in range(40)
        if j == int(np.argmin(dists[i])) and i == int(np.argmin(dists[:, j]))
    ]
    assert pairs(match_mutual_nn(queries, refs)) == expected


def test_mutual_nn_is_symmetric(rng):
    a, b = rng.normal(size=(25, 8)), rng.normal(size=(35, 8))
    forward = set(pairs(match_mutual_nn(a, b)))
    backward = {(j, i) for i, j in pairs(match_mutual_nn(b, a))}
    assert forward == backward


def test_mutual_nn_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        match_mutual_nn(rng.normal(size=(3, 8)), rng.normal(size=(3, 9)))


def test_mutual_nn_features_match_reported_words(small_dictionary):
    refs = small_dictionary.vectors()
    query = [PrivatizedFeature(indices=[1, 4], keypoint=(2.0, 3.0))]
    matches = match_mutual_nn_features(query, refs, small_dictionary)
    assert pairs(matches) == [(0, 1), (0, 4)]
    assert all(c.source is CorrespondenceSource.LDP for c in matches)
    assert matches[0].query_keypoint == (2.0, 3.0)


def test_mutual_nn_features_keep_one_owner_per_reference(small_dictionary):
    refs = small_dictionary.vectors()
    query = [PrivatizedFeature(indices=[2]), PrivatizedFeature(indices=[2, 5])]
    assert pairs(match_mutual_nn_features(query, refs, small_dictionary)) == [(0, 2), (1, 5)]


def test_mutual_nn_features_edge_cases(small_dictionary):
    refs = small_dictionary.vectors()
    assert match_mutual_nn_features([], refs, small_dictionary) == []
    with pytest.raises(ValueError):
        match_mutual_nn_features([PrivatizedFeature(indices=[0, 9])], refs, small_dictionary)


def test_vocabulary_matches_every_shared_word(small_dictionary):
    refs = small_dictionary.vectors()
    query = [PrivatizedFeature(indices=[1, 4], keypoint=(2.0, 3.0))]
    matches = match_vocabulary(query, refs, small_dictionary, ref_keypoints=[(float(j), 0.0) for j in range(6)])
    assert pairs(matches) == [(0, 1), (0, 4)]
    assert all(c.score == 1.0 and c.source is CorrespondenceSource.LDP for c in matches)
    assert matches[1].ref_keypoint == (4.0, 0.0)
    assert matches[0].query_keypoint == (2.0, 3.0)


def test_vocabulary_with_the_full_domain_matches_everything(small_dictionary, rng):
    refs = small_dictionary.vectors() + rng.normal(0.0, 0.01, size=(6, 8))
    query = [PrivatizedFeature(indices=range(6)) for _ in range(3)]
    matches = match_vocabulary(query, refs, small_dictionary)
    assert len(matches) == 3 * 6
    assert all(math.isnan(c.query_keypoint[0]) for c in matches)


def test_vocabulary_rejects_foreign_indices(small_dictionary):
    with pytest.raises(ValueError):
        match_vocabulary([PrivatizedFeature(indices=[2, 10])], small_dictionary.vectors(), small_dictionary)


def test_unbounded_single_word_matches_quantized_equality(small_dictionary, rng):
    cfg = LdpConfig(epsilon=math.inf, m=1, dictionary=small_dictionary)
    queries, refs = rng.normal(size=(15, 8)), rng.normal(size=(20, 8))
    features = [privatize(q, cfg, rng) for q in queries]
    query_words, _ = nearest_many(small_dictionary, queries)
    ref_words, _ = nearest_many(small_dictionary, refs)
    expected = [(i, j) for i in range(15) for j in range(20) if query_words[i] == ref_words[j]]
    assert pairs(match_vocabulary(features, refs, small_dictionary)) == expected


def test_point_to_subspace_finds_the_contained_reference(database, rng):
    refs = rng.normal(size=(30, 16))
    cfg = LiftingConfig(m=4, database=database, rng_seed=2)
    lifted = [lift(refs[j], cfg, counter_stream(2, j)).subspace for j in (4, 11, 25)]
    matches = match_point_to_subspace(refs, lifted)
    assert pairs(matches) == [(0, 4), (1, 11), (2, 25)]
    assert all(c.score < 1e-6 and c.source is CorrespondenceSource.LIFTED for c in matches)


def test_zero_ratio_rejects_everything(database, rng):
    refs = rng.normal(size=(10, 16))
    lifted = [lift(refs[0], LiftingConfig(m=4, database=database), rng).subspace]
    assert match_point_to_subspace(refs, lifted, ratio=0.0) == []


def test_subspace_to_subspace_pairs_liftings_of_the_same_descriptor(database, rng):
    descs = rng.normal(size=(6, 16))
    words = database.vectors()
    # disjoint databases, so two liftings can only meet at their descriptor
    ref_cfg = LiftingConfig(m=4, database=from_descriptors(words[:500]))
    query_cfg = LiftingConfig(m=4, database=from_descriptors(words[500:]))
    refs = [lift(d, ref_cfg, counter_stream(30, j)).subspace for j, d in enumerate(descs)]
    queries = [lift(descs[j], query_cfg, counter_stream(31, j)).subspace for j in (5, 0, 2)]
    matches = match_subspace_to_subspace(refs, queries)
    assert pairs(matches) == [(0, 5), (1, 0), (2, 2)]
    assert all(c.score < 1e-6 for c in matches)
