import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import unit_rows
from src.models import Dictionary, DictionaryMetric, LiftingConfig
from src.services import dictionary as dictionary_service
from src.services.dictionary import (
    build_spherical_kmeans,
    from_descriptors,
    info,
    nearest,
    nearest_many,
    ranked_distances,
    sorted_distances_to_subspace,
    with_partitions,
)
from src.services.geometry import affine_subspace
from src.services.lifting import lift
from src.utils import CorruptFile, DegenerateData, DimensionMismatch, GeometryError, VersionUnsupported


def antipodal_clusters(rng, per_cluster=200, spread=0.001):
    mu = unit_rows(rng, 1, 16)[0]
    points = np.vstack([
        mu + rng.normal(0.0, spread, size=(per_cluster, 16)),
        -mu + rng.normal(0.0, spread, size=(per_cluster, 16)),
    ])
    return mu, points


def test_kmeans_finds_antipodal_clusters(rng):
    mu, points = antipodal_clusters(rng)
    dictionary = build_spherical_kmeans(points, 2, iters=25, seed=0)
    centroids = dictionary.vectors()
    assert dictionary.metric is DictionaryMetric.COSINE
    for target in (mu, -mu):
        angle = np.arccos(np.clip(np.max(centroids @ target), -1.0, 1.0))
        assert angle < 1e-3


def test_kmeans_with_one_cluster_per_point(rng):
    data = unit_rows(rng, 12, 8)
    dictionary = build_spherical_kmeans(data, 12, iters=5, seed=1)
    similarities = data @ dictionary.vectors().T
    assert np.all(np.max(similarities, axis=1) > 1 - 1e-6)
    assert dictionary.provenance['loss'] == pytest.approx(0.0, abs=1e-6)


def test_kmeans_is_deterministic(rng):
    data = unit_rows(rng, 300, 16)
    first = build_spherical_kmeans(data, 10, seed=4)
    second = build_spherical_kmeans(data, 10, seed=4)
    assert_array_equal(first.entries, second.entries)
    assert first == second


def test_kmeans_objective_never_decreases(rng):
    _, points = antipodal_clusters(rng, spread=0.3)
    history = build_spherical_kmeans(points, 8, iters=25, seed=2).provenance['objective_history']
    assert np.all(np.diff(history) >= -1e-9)


def test_kmeans_rejects_identical_inputs():
    with pytest.raises(DegenerateData):
        build_spherical_kmeans(np.tile([0.6, 0.8, 0.0], (10, 1)), 2)


def test_kmeans_rejects_too_many_centroids(rng):
    with pytest.raises(ValueError):
        build_spherical_kmeans(unit_rows(rng, 5, 4), 6)


@pytest.mark.parametrize("scale", [1.0, 3.0])
def test_nearest_exact_hit_is_at_distance_zero(database, scale):
    index, distance = nearest(database, scale * database.vectors()[7].astype(np.float64))
    assert index == 7
    assert distance == 0.0


def test_nearest_many_snaps_exact_hits(database):
    _, distances = nearest_many(database, database.vectors()[:50])
    assert np.all(distances == 0.0)


def test_nearest_breaks_ties_by_lowest_index():
    entries = np.array([[10, 10], [-10, 10], [1, 0], [10, -10], [-10, -10], [-1, 0]], dtype=np.float32)
    dictionary = Dictionary(entries=entries, metric=DictionaryMetric.EUCLIDEAN)
    assert nearest(dictionary, (0.0, 0.0)) == (2, pytest.approx(1.0))


@pytest.mark.parametrize("metric", [DictionaryMetric.EUCLIDEAN, DictionaryMetric.COSINE])
def test_nearest_many_matches_linear_scan(metric, rng):
    entries = unit_rows(rng, 2000, 16)
    dictionary = Dictionary(entries=entries.astype(np.float32), metric=metric)
    queries = rng.normal(size=(500, 16))
    indices, _ = nearest_many(dictionary, queries)
    words = dictionary.vectors()
    for q, got in zip(queries, indices):
        if metric is DictionaryMetric.EUCLIDEAN:
            scores = np.linalg.norm(words - q, axis=1)
        else:
            scores = 1.0 - (words @ q) / (np.linalg.norm(words, axis=1) * np.linalg.norm(q))
        assert got == int(np.argmin(scores))


def test_nearest_many_blocks_agree(database, rng, monkeypatch):
    queries = rng.normal(size=(50, 16))
    expected = nearest_many(database, queries)[0]
    monkeypatch.setattr(dictionary_service, "_BLOCK_CELLS", 1000)
    assert_array_equal(nearest_many(database, queries)[0], expected)


def test_nearest_rejects_wrong_dimension(database):
    with pytest.raises(DimensionMismatch):
        nearest(database, np.ones(8))


def test_sorted_distances_hand_built():
    entries = np.array([[0, 2, 0], [5, 0, 1], [1, 0, 0]], dtype=np.float32)
    dictionary = Dictionary(entries=entries, metric=DictionaryMetric.EUCLIDEAN)
    axis = affine_subspace(np.zeros(3), [[1.0, 0.0, 0.0]])
    ranked = sorted_distances_to_subspace(dictionary, axis)
    assert [i for i, _ in ranked] == [2, 1, 0]
    assert [d for _, d in ranked] == pytest.approx([0.0, 1.0, 2.0])


def test_lifted_subspace_ranks_its_adversarial_samples_first(database, rng):
    rec = lift(rng.normal(size=16), LiftingConfig(m=4, database=database, rng_seed=3))
    ranked = sorted_distances_to_subspace(database, rec.subspace)
    assert len(ranked) == database.size
    assert sorted(i for i, _ in ranked[:2]) == sorted(rec.adversarial_indices)
    assert all(d < 1e-6 for _, d in ranked[:2])


def test_snapped_distances_tie_in_index_order(database, rng):
    rec = lift(rng.normal(size=16), LiftingConfig(m=4, database=database, rng_seed=3))
    order, distances = ranked_distances(database, rec.subspace, snap=1e-6)
    assert list(order[:2]) == sorted(rec.adversarial_indices)
    assert_array_equal(distances[:2], [0.0, 0.0])


def test_save_load_round_trip(tmp_path, rng):
    dictionary = build_spherical_kmeans(unit_rows(rng, 200, 16), 20, seed=3, source_id='test', partitions=4)
    path = tmp_path / "words.ldpd"
    dictionary_service.save(dictionary, path)
    loaded = dictionary_service.load(path)
    assert loaded == dictionary
    assert_array_equal(loaded.partitions, dictionary.partitions)
    assert loaded.provenance['source'] == 'test'


def test_truncated_dictionary_file(tmp_path, database, processor):
    path = tmp_path / "cut.ldpd"
    path.write_bytes(processor.encode_dictionary(database)[:-5])
    with pytest.raises(CorruptFile):
        dictionary_service.load(path)


def test_dictionary_file_with_wrong_magic(tmp_path, database, processor):
    path = tmp_path / "bad.ldpd"
    path.write_bytes(b'XXXX' + processor.encode_dictionary(database)[4:])
    with pytest.raises(CorruptFile):
        dictionary_service.load(path)


def test_dictionary_file_with_unknown_version(tmp_path, database, processor):
    content = bytearray(processor.encode_dictionary(database))
    content[4:6] = (9).to_bytes(2, 'little')
    path = tmp_path / "future.ldpd"
    path.write_bytes(bytes(content))
    with pytest.raises(VersionUnsupported):
        dictionary_service.load(path)


def test_from_descriptors_drops_duplicates(rng):
    rows = unit_rows(rng, 5, 8)
    dictionary = from_descriptors(np.vstack([rows, rows[:2]]))
    assert dictionary.size == 5
    assert np.allclose(np.linalg.norm(dictionary.vectors(), axis=1), 1.0, atol=1e-6)


def test_partition_map_and_info(database):
    split = with_partitions(database, 16)
    members = split.partition_members(16)
    assert len(members) == 16
    assert sum(len(m) for m in members) == database.size
    summary = info(split)
    assert summary['partitions'] == 16
    assert summary['size'] == 1000 and summary['dim'] == 16
    assert summary['metric'] == 'cosine'


def test_dictionary_invariants():
    with pytest.raises(GeometryError):
        Dictionary(entries=[[1.0, 0.0], [1.0, 0.0]], metric=DictionaryMetric.EUCLIDEAN)
    with pytest.raises(GeometryError):
        Dictionary(entries=[[2.0, 0.0]], metric=DictionaryMetric.COSINE)
