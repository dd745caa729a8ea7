import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from src.config import config
from src.models import ExperimentConfig
from src.services import experiments as experiments_module
from src.services.experiments import ExperimentRunner, sanitize, summary_table
from src.utils import ExperimentError

CORPUS = {'n': 16, 'components': 8, 'spread': 0.05, 'size': 400}


def make_config(kind, tmp_path, **sections):
    document = {
        'kind': kind,
        'trials': 4,
        'seed': 7,
        'output': str(tmp_path / f"{kind}.json"),
        'dictionary': {'source': 'corpus', 'size': 300, 'corpus': CORPUS},
    }
    document.update(sections)
    return ExperimentConfig.model_validate(document)


@pytest.fixture
def runner(processor):
    return ExperimentRunner(processor)


def without_timing(report):
    return {k: v for k, v in report.items() if k != 'timing'}


def test_database_attack_experiment(runner, tmp_path):
    cfg = make_config('lift-attack-db', tmp_path, lifting={'m': 4}, database_attack={'V_size': 16, 'U_size': 4})
    report = runner.run(cfg, write=False)
    assert report['schema_version'] == 1
    assert report['kind'] == 'lift-attack-db'
    assert report['metrics']['exact_adversarial_rate'] == 1.0
    assert set(report['metrics']) == {'exact_adversarial_rate', 'recovery_rate', 'median_cosine',
                                      'median_baseline_cosine', 'cosine_gain'}
    assert [row['trial'] for row in report['trials']] == [0, 1, 2, 3]
    assert len(report['timing']['trial_s']) == 4


def test_cluster_attack_experiment(runner, tmp_path):
    cfg = make_config('lift-attack-cluster', tmp_path, lifting={'m': 2},
                      cluster_attack={'V_size': 16, 'aux_count': 20, 'public_size': 400})
    report = runner.run(cfg, write=False)
    metrics = report['metrics']
    assert metrics['chance_rate'] == 0.5
    assert 0.0 <= metrics['correct_rate'] <= metrics['disambiguated_rate'] <= 1.0
    assert len(report['trials']) == 4


SPREAD_CORPUS = {'n': 16, 'components': 64, 'spread': 0.05, 'size': 4000}


@pytest.mark.slow
def test_cluster_attack_selects_the_concealed_cluster(runner, tmp_path):
    cfg = make_config('lift-attack-cluster', tmp_path, trials=100, lifting={'m': 4},
                      dictionary={'source': 'corpus', 'size': 1000, 'corpus': SPREAD_CORPUS},
                      cluster_attack={'V_size': 64, 'aux_count': 200, 'public_size': 2000})
    metrics = runner.run(cfg, write=False)['metrics']
    assert metrics['disambiguated_rate'] == 1.0
    assert metrics['correct_rate'] >= 0.7
    assert metrics['correct_rate'] > metrics['chance_rate']


@pytest.mark.slow
def test_collision_free_rate_falls_as_m_grows(runner, tmp_path):
    rates = []
    for m in (2, 4, 6):
        cfg = make_config('lift-attack-cluster', tmp_path, trials=60, lifting={'m': m},
                          dictionary={'source': 'corpus', 'size': 1000, 'corpus': SPREAD_CORPUS},
                          cluster_attack={'V_size': 16, 'aux_count': 50, 'public_size': 400,
                                          'collision_radius': 1.1})
        rates.append(runner.run(cfg, write=False)['metrics']['collision_free_rate'])
    assert rates[0] > rates[1] > rates[2]


def test_verify_experiment(runner, tmp_path):
    cfg = make_config('ldp-verify', tmp_path, ldp={'epsilon': 1.0, 'm': 2},
                      verify={'domain_size': 6, 'dim': 8, 'samples_per_input': 100000})
    metrics = runner.run(cfg, write=False)['metrics']
    assert metrics['passed'] is True
    assert metrics['analytic_worst_ratio'] == pytest.approx(math.e)
    assert metrics['bernoulli_p'] == pytest.approx(2 * math.e / (2 * math.e + 4))


def test_utility_experiment_skips_oversized_m(runner, tmp_path, caplog):
    cfg = make_config('ldp-utility', tmp_path, trials=2,
                      utility={'domain_size': 32, 'dim': 16, 'epsilons': [2.0], 'ms': [2, 64],
                               'keypoints': 20, 'ransac_iters': 100})
    report = runner.run(cfg, write=False)
    assert len(report['trials']) == 2
    assert report['trials'][0]['upper_bound'] is True
    assert report['trials'][0]['epsilon'] == "inf"
    assert list(report['metrics']['success_rate']) == ["eps=2.0,m=2"]
    assert "Skipping m=64" in caplog.text


def test_utility_experiment_outside_evaluation_mode(runner, tmp_path, monkeypatch):
    monkeypatch.setattr(config, "evaluation_mode", False)
    cfg = make_config('ldp-utility', tmp_path, trials=1,
                      utility={'domain_size': 32, 'dim': 16, 'epsilons': [2.0], 'ms': [2],
                               'keypoints': 20, 'ransac_iters': 100})
    report = runner.run(cfg, write=False)
    assert list(report['metrics']['success_rate']) == ["eps=2.0,m=2"]
    assert config.evaluation_mode is False


def test_intersection_experiment(runner, tmp_path):
    cfg = make_config('lift-intersections', tmp_path, intersections={'ms': [2, 4], 'top_ns': [2, 5]})
    report = runner.run(cfg, write=False)
    assert [(row['m'], row['top_n']) for row in report['trials']] == [(2, 2), (2, 5), (4, 2), (4, 5)]
    rates = report['metrics']['success_rate']
    assert set(rates) == {"m=2,N=2", "m=2,N=5", "m=4,N=2", "m=4,N=5"}
    assert all(0.0 <= rate <= 1.0 for rate in rates.values())
    assert report['metrics']['records_per_m'] == 4


@pytest.mark.parametrize("ms", [[3], [], [0]])
def test_intersection_settings_need_even_dimensions(tmp_path, ms):
    with pytest.raises(ValueError):
        make_config('lift-intersections', tmp_path, intersections={'ms': ms})


def test_dict_build_experiment(runner, tmp_path, processor):
    cfg = make_config('dict-build', tmp_path,
                      dictionary={'source': 'kmeans', 'size': 10, 'iters': 5, 'corpus': {**CORPUS, 'size': 200}})
    report = runner.run(cfg)
    path = report['metrics']['path']
    assert path.endswith('dict-build.ldpd')
    assert processor.load_dictionary(path).size == 10
    assert report['metrics']['size'] == 10


def test_bench_experiment(runner, tmp_path):
    cfg = make_config('bench', tmp_path, bench={'domain_sizes': [16], 'dim': 8, 'repetitions': 10, 'queries': 2, 'm': 2})
    report = runner.run(cfg, write=False)
    assert report['metrics']['kernels'] == ['nearest', 'privatize', 'project']
    assert report['metrics']['domain_sizes'] == [16]


def test_replay_is_identical_except_timing(runner, tmp_path):
    cfg = make_config('lift-attack-db', tmp_path, database_attack={'V_size': 16, 'U_size': 4})
    assert without_timing(runner.run(cfg, write=False)) == without_timing(runner.run(cfg, write=False))


def test_pooled_trials_match_inline_trials(processor, tmp_path):
    cfg = make_config('lift-attack-cluster', tmp_path, lifting={'m': 2},
                      cluster_attack={'V_size': 16, 'aux_count': 20, 'public_size': 400})
    inline = ExperimentRunner(processor).run(cfg, write=False)
    with ThreadPoolExecutor(max_workers=2) as pool:
        pooled = ExperimentRunner(processor, executor=pool).run(cfg, write=False)
    assert without_timing(inline) == without_timing(pooled)


def test_report_files(runner, tmp_path):
    cfg = make_config('lift-attack-db', tmp_path, database_attack={'V_size': 16, 'U_size': 4})
    runner.run(cfg)
    report = json.loads((tmp_path / "lift-attack-db.json").read_text())
    assert report['config']['seed'] == 7
    summary = (tmp_path / "lift-attack-db.txt").read_text()
    assert summary.startswith("lift-attack-db (seed 7)")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["lift-attack-db.json", "lift-attack-db.txt"]


def test_failing_trial_is_tagged(runner, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(experiments_module, "database_attack", broken)
    cfg = make_config('lift-attack-db', tmp_path, database_attack={'V_size': 16, 'U_size': 4})
    with pytest.raises(ExperimentError) as excinfo:
        runner.run(cfg)
    assert excinfo.value.trial == 0
    assert "trial 0: boom" in str(excinfo.value)
    assert not (tmp_path / "lift-attack-db.json").exists()


def test_sanitize_makes_strict_json():
    value = sanitize({'a': np.int64(3), 'b': [math.inf, -math.inf, math.nan], 'c': np.array([1.5]),
                      'd': np.bool_(True), 4: (np.float32(0.5),)})
    assert value == {'a': 3, 'b': ["inf", "-inf", None], 'c': [1.5], 'd': True, '4': [0.5]}
    json.dumps(value, allow_nan=False)


def test_summary_table_lists_metrics_and_trials():
    report = {'kind': 'bench', 'config': {'seed': 1}, 'metrics': {'x': {'y': 2}},
              'trials': [{'kernel': 'nearest', 'ops': 3}]}
    text = summary_table(report)
    assert "x.y" in text
    assert "nearest" in text
