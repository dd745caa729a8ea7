import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import cosine_dictionary, unit_rows
from src.models import ClusterAttackConfig, DatabaseAttackConfig, Dictionary, DictionaryMetric, LiftingConfig, LiftingRecord
from src.services.attacks import (
    cluster_attack,
    collision_rate,
    database_attack,
    intersecting_aux,
    intersection_success_rate,
    random_baseline,
    recovery_metrics,
)
from src.services.corpus import sample_mixture
from src.services.dictionary import from_descriptors, ranked_distances
from src.services.geometry import affine_subspace, point_to_subspace_dist, project
from src.services.lifting import lift
from src.utils import InsufficientNeighbors, NoIntersectingAux, counter_stream

E = np.eye(8)


@pytest.fixture
def clustered():
    """A mixture database of 1000 entries plus 100 held-out descriptors."""
    points, _, _ = sample_mixture({'n': 16, 'components': 20, 'spread': 0.05, 'size': 1100}, seed=5)
    return from_descriptors(points[:1000], source_id='mixture'), points[1000:]


@pytest.fixture
def two_cluster_scene():
    """D through d and a; public entries in tight clusters around both, plus far clutter."""
    rng = counter_stream(40)
    d, a = E[0], E[1]
    D = affine_subspace(d, [a - d, E[2]])
    public = np.vstack([
        d + rng.normal(0.0, 0.01, size=(20, 8)),
        a + rng.normal(0.0, 0.01, size=(20, 8)),
        3 * E[6] + rng.normal(0.0, 0.5, size=(30, 8)),
    ])
    return d, a, D, Dictionary(entries=public, metric=DictionaryMetric.EUCLIDEAN)


def test_database_attack_recovers_planted_samples_exactly(database, planted_records):
    attack = DatabaseAttackConfig(database=database, m=4)
    for rec in planted_records:
        estimate = database_attack(rec.subspace, attack)
        assert sorted(estimate.recovered_indices) == sorted(rec.adversarial_indices)
        for hat in estimate.adversarial_hats:
            assert point_to_subspace_dist(rec.subspace, hat) < 1e-6
        assert recovery_metrics(estimate, rec.original, rec.adversarial_indices).exact_adversarial


def test_single_neighbor_estimate_is_its_projection(database, rng):
    rec = lift(rng.normal(size=16), LiftingConfig(m=4, database=database, rng_seed=1))
    estimate = database_attack(rec.subspace, DatabaseAttackConfig(database=database, m=4, V_size=1, U_size=1))
    order, _ = ranked_distances(database, rec.subspace, snap=1e-9)
    assert_allclose(estimate.d_hat, project(rec.subspace, database.vectors()[order[2]]), atol=1e-9)


def test_estimate_lies_on_the_attacked_subspace(database, planted_records):
    attack = DatabaseAttackConfig(database=database, m=4)
    for rec in planted_records[:5]:
        assert point_to_subspace_dist(rec.subspace, database_attack(rec.subspace, attack).d_hat) < 1e-6


def dense_around_first(rng, opposite, count=500, cluster=20):
    """Unit rows where entry 0 sits in a tight cluster and the ``opposite`` entries lie across the sphere."""
    entries = unit_rows(rng, count, 16)
    mates = entries[0] + rng.normal(0.0, 0.01, size=(cluster, 16))
    entries[1:cluster + 1] = mates / np.linalg.norm(mates, axis=1, keepdims=True)
    far = -entries[0] + rng.normal(0.0, 0.3, size=(len(opposite), 16))
    entries[opposite] = far / np.linalg.norm(far, axis=1, keepdims=True)
    return Dictionary(entries=entries.astype(np.float32), metric=DictionaryMetric.COSINE)


@pytest.mark.parametrize("forced", [[300, 400], [250, 499], [100, 450]])
def test_descriptor_inside_the_database_is_recovered(rng, forced):
    database = dense_around_first(rng, forced)
    d = database.vectors()[0]
    rec = lift(d, LiftingConfig(m=4, database=database), rng, forced_indices=forced)
    estimate = database_attack(rec.subspace, DatabaseAttackConfig(database=database, m=4))
    _, distances = ranked_distances(database, rec.subspace, snap=1e-6)
    assert np.all(distances[:3] == 0.0)
    assert_allclose(estimate.d_hat, d, atol=1e-9)
    assert sorted(estimate.recovered_indices) == sorted(forced)


def test_zero_distance_entries_stay_out_of_the_neighborhood(rng):
    database = dense_around_first(rng, [300, 400])
    rec = lift(database.vectors()[0], LiftingConfig(m=4, database=database), rng, forced_indices=[300, 400])
    estimate = database_attack(rec.subspace, DatabaseAttackConfig(database=database, m=4))
    on_subspace = {0, 300, 400}
    neighbors = [vec for vec, _ in estimate.candidate_scores]
    assert len(neighbors) == 64
    for vec in neighbors:
        assert point_to_subspace_dist(rec.subspace, vec) > 1e-6
        assert not any(np.array_equal(vec, database.vectors()[i]) for i in on_subspace)


def test_database_attack_beats_a_random_entry(clustered):
    database, held = clustered
    lifting = LiftingConfig(m=4, database=database, rng_seed=3)
    attack = DatabaseAttackConfig(database=database, m=4)
    gains = []
    for t, d in enumerate(held):
        rng = counter_stream(3, t)
        estimate = database_attack(lift(d, lifting, rng).subspace, attack)
        gains.append(recovery_metrics(estimate, d).cosine - random_baseline(database, d, rng))
    gains = np.array(gains)
    assert np.sum(gains > 0) >= 95
    assert np.median(gains) >= 0.2


def test_too_few_neighbors():
    database = Dictionary(entries=np.eye(6) + 0.1, metric=DictionaryMetric.EUCLIDEAN)
    rec = lift(np.zeros(6) + 0.5, LiftingConfig(m=4, database=database), counter_stream(0))
    with pytest.raises(InsufficientNeighbors):
        database_attack(rec.subspace, DatabaseAttackConfig(database=database, m=4, V_size=8, U_size=8))


def test_cluster_attack_picks_the_unshared_cluster(two_cluster_scene):
    d, a, D, public = two_cluster_scene
    crossing = affine_subspace(a, [E[4], E[5]])
    cfg = ClusterAttackConfig(public_db=public, aux_subspaces=(crossing,), m=2, V_size=40)
    estimate = cluster_attack(D, cfg)
    assert estimate.intersecting_aux == [0]
    assert len(estimate.candidate_scores) == 2
    assert np.linalg.norm(estimate.d_hat - d) < 0.05
    assert np.linalg.norm(estimate.adversarial_hats[0] - a) < 0.05


def test_cluster_attack_without_intersections(two_cluster_scene):
    d, _, D, public = two_cluster_scene
    disjoint = affine_subspace(d + 5 * E[5], [E[6]])
    cfg = ClusterAttackConfig(public_db=public, aux_subspaces=(disjoint,), m=2, V_size=40)
    with pytest.raises(NoIntersectingAux) as excinfo:
        cluster_attack(D, cfg)
    assert len(excinfo.value.candidates) == 2


def test_intersecting_aux_skips_the_attacked_subspace(two_cluster_scene):
    _, a, D, _ = two_cluster_scene
    crossing = affine_subspace(a, [E[4]])
    assert intersecting_aux(D, [D, crossing], 1e-4) == [1]


def test_collision_rate(two_cluster_scene):
    d, _, D, public = two_cluster_scene
    rec = LiftingRecord(subspace=D, original=d)
    through_d = ClusterAttackConfig(public_db=public, aux_subspaces=(affine_subspace(d, [E[6]]),), m=2)
    disjoint = ClusterAttackConfig(public_db=public, aux_subspaces=(affine_subspace(d + 5 * E[5], [E[6]]),), m=2)
    assert collision_rate([rec], through_d) == 0.0
    assert collision_rate([rec], disjoint) == 1.0


@pytest.fixture(scope="module")
def desk_database():
    """A desk-scale database: 10^4 unit vectors in R^128."""
    return cosine_dictionary(counter_stream(41), 10000, 128)


@pytest.mark.slow
def test_intersection_success_at_desk_scale(desk_database):
    descriptors = unit_rows(counter_stream(43), 200, 128)
    rates = {}
    for m in (4, 16):
        cfg = LiftingConfig(m=m, database=desk_database, rng_seed=43)
        records = [lift(d, cfg, counter_stream(43, m, t)) for t, d in enumerate(descriptors)]
        rates[m] = intersection_success_rate(records, desk_database, top_n=5)
    assert rates[4] > 0.90
    assert rates[16] < rates[4]
    # only five of the eight planted samples fit in the top five
    assert rates[16] <= 6 / 9 + 1e-12


def test_intersection_success_counts_planted_samples(database, planted_records):
    rate = intersection_success_rate(planted_records, database, top_n=5)
    assert 2 / 3 - 1e-12 <= rate <= 1.0


def test_recovery_metrics_of_a_perfect_estimate(database, planted_records):
    rec = planted_records[0]
    estimate = database_attack(rec.subspace, DatabaseAttackConfig(database=database, m=4))
    estimate.d_hat = np.asarray(rec.original, dtype=float)
    quality = recovery_metrics(estimate, rec.original)
    assert quality.cosine == pytest.approx(1.0)
    assert quality.l2_error == pytest.approx(0.0, abs=1e-12)
    assert quality.exact_adversarial is None


def test_random_baseline_is_a_cosine(database, rng):
    for _ in range(10):
        assert -1.0 <= random_baseline(database, rng.normal(size=16), rng) <= 1.0
