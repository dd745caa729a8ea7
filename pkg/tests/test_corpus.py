import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.models import DescriptorDType
from src.models.experiment import BenchSettings
from src.services.bench import run_bench, time_kernel
from src.services.corpus import generate_corpus, generate_corpus_matrix, sample_mixture
from src.utils import CorpusError

SPEC = {'n': 16, 'components': 8, 'spread': 0.05, 'size': 300}


def test_corpus_is_deterministic_under_its_seed():
    first, second = generate_corpus(SPEC, seed=3), generate_corpus(SPEC, seed=3)
    assert len(first) == 300
    assert all(a == b for a, b in zip(first, second))
    assert first[0].dtype is DescriptorDType.FLOAT32
    assert not np.array_equal(generate_corpus_matrix(SPEC, 3), generate_corpus_matrix(SPEC, 4))


def test_mixture_points_are_unit_vectors():
    points = generate_corpus_matrix(SPEC, seed=1)
    assert points.shape == (300, 16)
    assert np.allclose(np.linalg.norm(points, axis=1), 1.0)


def test_vanishing_spread_collapses_onto_the_means():
    points, means, labels = sample_mixture({**SPEC, 'spread': 1e-9}, seed=2)
    assert np.max(np.linalg.norm(points - means[labels], axis=1)) < 1e-6


@pytest.mark.parametrize("bad", [{'size': 0}, {'spread': 0.0}, {'n': 1}, {'generator': 'sift'}, {'colour': 'red'}])
def test_invalid_corpus_specs(bad):
    with pytest.raises(CorpusError):
        generate_corpus_matrix({**SPEC, **bad}, seed=0)


def test_uniform_cube():
    points = generate_corpus_matrix({'n': 8, 'generator': 'uniform-cube', 'size': 500}, seed=0)
    assert points.shape == (500, 8)
    assert points.min() >= 0.0 and points.max() < 1.0


def test_file_corpus(tmp_path, processor):
    source = generate_corpus_matrix(SPEC, seed=5)
    path = tmp_path / "corpus.ldpf"
    processor.save_descriptor_file(path, source)
    loaded = generate_corpus_matrix({'n': 16, 'generator': 'file', 'path': str(path), 'size': 10}, seed=0)
    assert_array_equal(loaded, source[:10].astype(np.float32))


def test_file_corpus_checks_its_inputs(tmp_path, processor):
    path = tmp_path / "corpus.ldpf"
    processor.save_descriptor_file(path, np.ones((3, 4)))
    with pytest.raises(CorpusError):
        generate_corpus_matrix({'n': 16, 'generator': 'file', 'path': str(path)}, seed=0)
    with pytest.raises(CorpusError):
        generate_corpus_matrix({'n': 16, 'generator': 'file'}, seed=0)


def test_time_kernel_reports_median_and_tail():
    timing = time_kernel(lambda: sum(range(100)), 5)
    assert 0.0 <= timing['median_s'] <= timing['p95_s']


def test_bench_rows():
    settings = BenchSettings(domain_sizes=[16, 64], dim=8, repetitions=10, queries=4, m=2)
    rows = run_bench(settings, seed=1)
    assert len(rows) == 6
    assert {r['kernel'] for r in rows} == {'project', 'nearest', 'privatize'}
    assert [r['domain_size'] for r in rows] == [16] * 3 + [64] * 3
    assert all(r['ops'] == 4 and r['ops_per_sec'] > 0 for r in rows)
