"""Throughput benchmarks of the core kernels."""

import time
from typing import Any, Callable, Dict, List

import numpy as np
from tqdm import tqdm

from ..config import config
from ..models.descriptors import Dictionary, DictionaryMetric
from ..models.experiment import BenchSettings
from ..models.privacy import LdpConfig
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream
from .dictionary import nearest_many
from .geometry import affine_subspace, project_many
from .ldp import privatize_index

logger = get_logger(__name__)


def time_kernel(kernel: Callable[[], Any], repetitions: int) -> Dict[str, float]:
    """Median and 95th percentile wall-clock seconds of ``kernel``."""
    samples = []
    for _ in range(repetitions):
        started = time.perf_counter()
        kernel()
        samples.append(time.perf_counter() - started)
    samples = np.asarray(samples)
    return {'median_s': float(np.median(samples)), 'p95_s': float(np.percentile(samples, 95))}


def _random_dictionary(size: int, dim: int, rng: np.random.Generator) -> Dictionary:
    entries = rng.normal(size=(size, dim)).astype(np.float32)
    entries /= np.linalg.norm(entries, axis=1, keepdims=True)
    return Dictionary(entries=entries, metric=DictionaryMetric.COSINE, provenance={'builder': 'bench'})


def run_bench(settings: BenchSettings, seed: int = 0) -> List[Dict[str, Any]]:
    """
    Time projection, nearest-neighbor scan and privatization per domain size.

    Returns:
        One row per (kernel, domain size) with median/p95 seconds and ops/sec
    """
    rows = []
    rng = counter_stream(seed)
    queries = rng.normal(size=(settings.queries, settings.dim))
    m = min(settings.m, settings.dim - 1)
    subspace = affine_subspace(rng.normal(size=settings.dim), rng.normal(size=(max(1, m), settings.dim)))

    with config.evaluation():
        for size in tqdm(settings.domain_sizes, desc="bench", disable=not config.show_progress):
            rows.extend(_bench_domain(settings, size, seed, rng, queries, subspace))
    return rows


def _bench_domain(settings: BenchSettings, size: int, seed: int, rng: np.random.Generator,
                  queries: np.ndarray, subspace) -> List[Dict[str, Any]]:
    rows = []
    dictionary = _random_dictionary(size, settings.dim, rng)
    k = min(settings.m, size)
    ldp = LdpConfig(epsilon=1.0, m=k, domain_size_override=size)
    stream = counter_stream(seed, size)
    kernels = {
        'project': (lambda: project_many(subspace, queries), settings.queries),
        'nearest': (lambda: nearest_many(dictionary, queries), settings.queries),
        'privatize': (lambda: [privatize_index(0, ldp, stream) for _ in range(settings.queries)],
                      settings.queries),
    }
    for name, (kernel, ops) in kernels.items():
        timing = time_kernel(kernel, settings.repetitions)
        ops_per_sec = ops / timing['median_s'] if timing['median_s'] > 0 else float('inf')
        rows.append({'kernel': name, 'domain_size': size, 'ops': ops,
                     'ops_per_sec': ops_per_sec, **timing})
        logger.info(f"bench {name} |K|={size}: {ops_per_sec:.1f} ops/s")
    return rows
