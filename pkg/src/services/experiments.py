"""Experiment pipelines and report writing."""

import json
import math
import time
from concurrent.futures import Executor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..config import config
from ..models.attacks import ClusterAttackConfig, DatabaseAttackConfig
from ..models.descriptors import Dictionary, DictionaryMetric
from ..models.experiment import ExperimentConfig
from ..models.lifting import LiftingConfig
from ..models.matching import RansacParams, TransformModel
from ..models.privacy import LdpConfig
from ..utils.exceptions import ConfigurationError, ExperimentError, LdpFeatError, NoIntersectingAux
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream
from .attacks import (
    cluster_attack,
    collision_rate,
    database_attack,
    intersection_success_rate,
    random_baseline,
    recovery_metrics,
)
from .bench import run_bench
from .corpus import generate_corpus_matrix
from .dictionary import build_spherical_kmeans, from_descriptors, info
from .file_processor import FileProcessor
from .ldp import bernoulli_p
from .lifting import lift
from .matchers import MatcherFactory
from .scenes import make_scene
from .utility import utility_report
from .verification import analytic_worst_ratio, verify_ldp

logger = get_logger(__name__)

SCHEMA_VERSION = 1

# spawn-key stages, so trial streams of different pipeline stages never overlap
_STAGE_TRIAL = 1
_STAGE_AUX = 2
_STAGE_VERIFY = 3
_STAGE_SCENE = 4

TrialResult = Tuple[Dict[str, Any], float]


def sanitize(value: Any) -> Any:
    """Make a value strict-JSON serializable (numpy scalars, inf, nan)."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def summary_table(report: Dict[str, Any]) -> str:
    """Plain-text summary: metrics first, then the per-trial table."""
    metrics = pd.json_normalize(report['metrics'], sep='.')
    lines = [f"{report['kind']} (seed {report['config']['seed']})", ""]
    if not metrics.empty:
        lines.append(metrics.T.rename(columns={0: 'value'}).to_string())
    rows = report.get('trials') or []
    if rows:
        frame = pd.DataFrame(rows)
        lines += ["", frame.to_string(index=False)]
    return "\n".join(lines) + "\n"


class ExperimentRunner:
    """Runs experiment configurations and writes their reports."""

    def __init__(self, file_processor: FileProcessor, executor: Optional[Executor] = None):
        """
        Initialize the runner.

        Args:
            file_processor: Used for dictionary files and atomic report writes
            executor: Worker pool for trials; trials run inline when None
        """
        self.file_processor = file_processor
        self.executor = executor
        self._pipelines: Dict[str, Callable[[ExperimentConfig], Tuple[Dict, List, Dict]]] = {
            'dict-build': self._run_dict_build,
            'lift-attack-db': self._run_attack_db,
            'lift-attack-cluster': self._run_attack_cluster,
            'lift-intersections': self._run_intersections,
            'ldp-verify': self._run_ldp_verify,
            'ldp-utility': self._run_ldp_utility,
            'bench': self._run_bench,
        }

    def run(self, cfg: ExperimentConfig, write: bool = True) -> Dict[str, Any]:
        """
        Run one experiment.

        Args:
            cfg: Validated experiment configuration
            write: Write the JSON report and summary table to cfg.output

        Returns:
            The report dictionary

        Raises:
            ExperimentError: If a trial fails (tagged with its index)
            LdpFeatError: Module errors outside trials pass through
        """
        logger.info(f"Running {cfg.kind} experiment: {cfg.trials} trial(s), seed {cfg.seed}")
        started = time.perf_counter()
        try:
            with config.evaluation():
                metrics, rows, timing = self._pipelines[cfg.kind](cfg)
        except LdpFeatError:
            raise
        except Exception as e:
            logger.error(f"Experiment {cfg.kind} failed: {str(e)}")
            raise ExperimentError(f"Experiment {cfg.kind} failed: {str(e)}") from e
        timing['total_s'] = time.perf_counter() - started

        report = sanitize({
            'schema_version': SCHEMA_VERSION,
            'kind': cfg.kind,
            'config': cfg.model_dump(mode='json'),
            'metrics': metrics,
            'trials': rows,
            'timing': timing,
        })
        if write:
            self.write_report(report, cfg.output)
        logger.info(f"Experiment {cfg.kind} finished in {timing['total_s']:.2f}s")
        return report

    def write_report(self, report: Dict[str, Any], output: str) -> None:
        """Write the JSON report and its summary table next to it."""
        path = Path(output)
        text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
        self.file_processor.write_text(path, text + "\n")
        self.file_processor.write_text(path.with_suffix('.txt'), summary_table(report))

    # trial plumbing

    def _map_trials(self, trial: Callable[[int], TrialResult], count: int) -> Tuple[List, List]:
        def guarded(t: int) -> TrialResult:
            try:
                return trial(t)
            except ExperimentError:
                raise
            except Exception as e:
                logger.error(f"Trial {t} failed: {str(e)}")
                raise ExperimentError(str(e), trial=t) from e

        if self.executor is not None:
            results = self.executor.map(guarded, range(count))
        else:
            results = map(guarded, range(count))
        rows, elapsed = [], []
        for row, seconds in tqdm(results, total=count, desc="trials", disable=not config.show_progress):
            rows.append(row)
            elapsed.append(seconds)
        return rows, elapsed

    def _dictionary_and_holdout(self, cfg: ExperimentConfig, holdout: int) -> Tuple[Dictionary, np.ndarray]:
        """Build the dictionary and draw ``holdout`` more descriptors from the same corpus."""
        settings = cfg.dictionary
        spec = settings.corpus
        metric = DictionaryMetric.COSINE if settings.metric == "cosine" else DictionaryMetric.EUCLIDEAN
        if settings.source == "file":
            if not settings.path:
                raise ConfigurationError("dictionary.path is required when dictionary.source is 'file'")
            dictionary = self.file_processor.load_dictionary(settings.path)
            held = generate_corpus_matrix(spec.model_copy(update={'size': max(1, holdout)}), cfg.seed)
            return dictionary, held[:holdout]

        base = settings.size if settings.source == "corpus" else spec.size
        points = generate_corpus_matrix(spec.model_copy(update={'size': base + holdout}), cfg.seed)
        training, held = points[:base], points[base:]
        if settings.source == "corpus":
            dictionary = from_descriptors(training, metric=metric, source_id=spec.generator,
                                          partitions=settings.partitions)
        else:
            dictionary = build_spherical_kmeans(training, settings.size, iters=settings.iters, seed=cfg.seed,
                                                source_id=spec.generator, partitions=settings.partitions)
        return dictionary, held

    def _lifting_config(self, cfg: ExperimentConfig, database: Dictionary) -> LiftingConfig:
        return LiftingConfig(m=cfg.lifting.m, database=database, rng_seed=cfg.seed,
                             value_range=tuple(cfg.lifting.value_range), partitions=cfg.lifting.partitions)

    # pipelines

    def _run_dict_build(self, cfg: ExperimentConfig):
        dictionary, _ = self._dictionary_and_holdout(cfg, 0)
        path = cfg.dictionary.path if cfg.dictionary.source != "file" and cfg.dictionary.path else None
        path = path or str(Path(cfg.output).with_suffix('.ldpd'))
        self.file_processor.save_dictionary(dictionary, path)
        metrics = info(dictionary)
        metrics['path'] = path
        return metrics, [], {}

    def _run_attack_db(self, cfg: ExperimentConfig):
        database, queries = self._dictionary_and_holdout(cfg, cfg.trials)
        lifting = self._lifting_config(cfg, database)
        attack = DatabaseAttackConfig(database=database, m=cfg.lifting.m,
                                      V_size=cfg.database_attack.V_size, U_size=cfg.database_attack.U_size)

        def trial(t: int) -> TrialResult:
            rng = counter_stream(cfg.seed, _STAGE_TRIAL, t)
            d = queries[t]
            rec = lift(d, lifting, rng)
            estimate = database_attack(rec.subspace, attack)
            quality = recovery_metrics(estimate, d, rec.adversarial_indices)
            baseline = random_baseline(database, d, rng)
            return {
                'trial': t,
                'cosine': quality.cosine,
                'l2_error': quality.l2_error,
                'exact_adversarial': quality.exact_adversarial,
                'baseline_cosine': baseline,
                'beats_chance': quality.cosine > baseline,
            }, estimate.elapsed_s

        rows, elapsed = self._map_trials(trial, cfg.trials)
        cosines = np.array([r['cosine'] for r in rows])
        baselines = np.array([r['baseline_cosine'] for r in rows])
        metrics = {
            'exact_adversarial_rate': float(np.mean([r['exact_adversarial'] for r in rows])),
            'recovery_rate': float(np.mean([r['beats_chance'] for r in rows])),
            'median_cosine': float(np.median(cosines)),
            'median_baseline_cosine': float(np.median(baselines)),
            'cosine_gain': float(np.median(cosines) - np.median(baselines)),
        }
        return metrics, rows, {'trial_s': elapsed}

    def _run_attack_cluster(self, cfg: ExperimentConfig):
        settings = cfg.cluster_attack
        half = cfg.lifting.m // 2
        extras = settings.public_size + settings.aux_count + cfg.trials * (1 + half)
        database, held = self._dictionary_and_holdout(cfg, extras)
        public = from_descriptors(held[:settings.public_size], metric=database.metric, source_id='public')
        aux_points = held[settings.public_size:settings.public_size + settings.aux_count]
        rest = held[settings.public_size + settings.aux_count:]
        queries, forcing = rest[:cfg.trials], rest[cfg.trials:]
        lifting = self._lifting_config(cfg, database)
        base_aux = [lift(a, lifting, counter_stream(cfg.seed, _STAGE_AUX, i)).subspace
                    for i, a in enumerate(aux_points)]

        def trial(t: int) -> TrialResult:
            rng = counter_stream(cfg.seed, _STAGE_TRIAL, t)
            d = queries[t]
            rec = lift(d, lifting, rng)
            crossing = [
                lift(forcing[t * half + j], lifting, rng, forced_indices=[a]).subspace
                for j, a in enumerate(rec.adversarial_indices)
            ]
            attack = ClusterAttackConfig(
                public_db=public, aux_subspaces=tuple(base_aux + crossing), m=cfg.lifting.m,
                V_size=settings.V_size, intersection_tol=settings.intersection_tol,
                collision_radius=settings.collision_radius, seed=cfg.seed + t,
            )
            row = {'trial': t, 'collision_free': collision_rate([rec], attack) == 1.0,
                   'baseline_cosine': random_baseline(public, d, rng)}
            started = time.perf_counter()
            try:
                estimate = cluster_attack(rec.subspace, attack)
            except NoIntersectingAux as e:
                logger.debug(f"Trial {t}: no intersecting auxiliary subspace")
                row.update({'disambiguated': False, 'correct': False, 'cosine': None,
                            'intersecting_aux': 0, 'candidates': len(e.candidates)})
                return row, time.perf_counter() - started
            candidates = [c for c, _ in estimate.candidate_scores]
            closest = int(np.argmin([np.linalg.norm(c - d) for c in candidates]))
            chosen = next(i for i, c in enumerate(candidates) if c is estimate.d_hat)
            row.update({
                'disambiguated': True,
                'correct': closest == chosen,
                'cosine': recovery_metrics(estimate, d).cosine,
                'intersecting_aux': len(estimate.intersecting_aux),
                'candidates': len(candidates),
            })
            return row, estimate.elapsed_s

        rows, elapsed = self._map_trials(trial, cfg.trials)
        cosines = [r['cosine'] for r in rows if r['cosine'] is not None]
        metrics = {
            'correct_rate': float(np.mean([r['correct'] for r in rows])),
            'chance_rate': 1.0 / (half + 1),
            'disambiguated_rate': float(np.mean([r['disambiguated'] for r in rows])),
            'collision_free_rate': float(np.mean([r['collision_free'] for r in rows])),
            'median_cosine': float(np.median(cosines)) if cosines else None,
            'median_baseline_cosine': float(np.median([r['baseline_cosine'] for r in rows])),
        }
        return metrics, rows, {'trial_s': elapsed}

    def _run_intersections(self, cfg: ExperimentConfig):
        settings = cfg.intersections
        database, queries = self._dictionary_and_holdout(cfg, cfg.trials)

        def cell(i: int) -> TrialResult:
            m = settings.ms[i]
            lifting = LiftingConfig(m=m, database=database, rng_seed=cfg.seed,
                                    value_range=tuple(cfg.lifting.value_range),
                                    partitions=cfg.lifting.partitions)
            started = time.perf_counter()
            records = [lift(d, lifting, counter_stream(cfg.seed, _STAGE_TRIAL, m, t))
                       for t, d in enumerate(queries)]
            rates = {n: intersection_success_rate(records, database, top_n=n, ratio=settings.ratio)
                     for n in settings.top_ns}
            return {'m': m, 'rates': rates}, time.perf_counter() - started

        cells, elapsed = self._map_trials(cell, len(settings.ms))
        rows = [{'m': c['m'], 'top_n': n, 'success_rate': rate}
                for c in cells for n, rate in c['rates'].items()]
        metrics = {
            'success_rate': {f"m={r['m']},N={r['top_n']}": r['success_rate'] for r in rows},
            'records_per_m': cfg.trials,
        }
        return metrics, rows, {'cell_s': elapsed}

    def _random_domain(self, size: int, dim: int, seed: int, stage: int) -> Dictionary:
        rng = counter_stream(seed, stage)
        entries = rng.normal(size=(size, dim))
        return from_descriptors(entries, metric=DictionaryMetric.COSINE, source_id='random-sphere')

    def _run_ldp_verify(self, cfg: ExperimentConfig):
        settings = cfg.verify
        domain = self._random_domain(settings.domain_size, settings.dim, cfg.seed, _STAGE_VERIFY)
        ldp = LdpConfig(epsilon=cfg.ldp.epsilon_value, m=cfg.ldp.m, dictionary=domain)
        verdict = verify_ldp(ldp, settings.samples_per_input, rng=cfg.seed, executor=self.executor)
        metrics = verdict.to_dict()
        metrics['analytic_worst_ratio'] = analytic_worst_ratio(ldp)
        metrics['bernoulli_p'] = bernoulli_p(ldp)
        rows = [{'scenario': name, 'pooled_ratio': ratio} for name, ratio in verdict.scenario_ratios.items()]
        return metrics, rows, {}

    def _run_ldp_utility(self, cfg: ExperimentConfig):
        settings = cfg.utility
        domain = self._random_domain(settings.domain_size, settings.dim, cfg.seed, _STAGE_SCENE)
        model = TransformModel(settings.model)
        scenes = [
            make_scene(domain.vectors(), settings.keypoints, model, counter_stream(cfg.seed, _STAGE_SCENE, t),
                       noise_px=settings.noise_px, outlier_fraction=settings.outlier_fraction,
                       descriptor_noise=settings.descriptor_noise)
            for t in range(cfg.trials)
        ]
        matcher = MatcherFactory.create_matcher(settings.matcher, m=cfg.lifting.m, seed=cfg.seed)
        params = RansacParams(iters=settings.ransac_iters, inlier_px=settings.inlier_px,
                              success_px=settings.success_px, min_inliers=settings.min_inliers, seed=cfg.seed)

        grid = [(math.inf, 1)] + [(e, m) for e in settings.epsilon_values for m in settings.ms]
        valid = []
        for epsilon, m in grid:
            if m > domain.size:
                logger.warning(f"Skipping m={m}: larger than the domain ({domain.size})")
                continue
            valid.append((epsilon, m))

        def cell(i: int) -> TrialResult:
            epsilon, m = valid[i]
            started = time.perf_counter()
            result = utility_report(scenes, LdpConfig(epsilon=epsilon, m=m, dictionary=domain),
                                    matcher, params, seed=cfg.seed)
            row = result.to_row()
            row['upper_bound'] = i == 0
            return row, time.perf_counter() - started

        rows, elapsed = self._map_trials(cell, len(valid))
        metrics = {
            'upper_bound_success_rate': rows[0]['success_rate'],
            'success_rate': {f"eps={r['epsilon']},m={r['m']}": r['success_rate'] for r in rows[1:]},
            'max_survival_deviation_sigma': max(
                (abs(r['word_survival_rate'] - r['expected_survival']) / r['survival_sigma']
                 for r in rows if r['survival_sigma'] > 0),
                default=0.0,
            ),
        }
        return metrics, rows, {'cell_s': elapsed}

    def _run_bench(self, cfg: ExperimentConfig):
        rows = run_bench(cfg.bench, cfg.seed)
        metrics = {'kernels': sorted({r['kernel'] for r in rows}),
                   'domain_sizes': list(cfg.bench.domain_sizes)}
        return metrics, rows, {}
