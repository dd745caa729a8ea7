"""The omega-subset mechanism and the LDP-Feat privatizer.

LDP-Feat replaces a descriptor by its nearest dictionary word d' and reports
a random m-subset Z of the dictionary: a Bernoulli u decides whether d' is
included, and the remaining m - u words are drawn uniformly from K - {d'}.
The budget epsilon applies per descriptor; privatizing many keypoints of one
image composes and is not accounted for here.
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, gammaln

from ..config import config
from ..models.privacy import LdpConfig, PrivatizedFeature
from ..utils.exceptions import ConfigurationError, EmptyDictionary
from ..utils.logging_config import get_logger
from ..utils.random_streams import RandomSource, SecureStream, resolve_stream
from ..utils.validators import as_matrix, validate_epsilon
from .dictionary import nearest, nearest_many

logger = get_logger(__name__)

# cells of the (draws x domain) key matrix generated at once
_BLOCK_CELLS = 1 << 22


def _log_odds(epsilon: float, m: int, domain_size: int) -> float:
    """log(m e^eps / (|K| - m)); +inf when m covers the domain."""
    rest = int(domain_size) - int(m)
    if rest <= 0:
        return math.inf
    return epsilon + math.log(m) - math.log(rest)


def bernoulli_p_symbolic(epsilon: float, m: int, domain_size: int) -> float:
    """
    Pr(u = 1) = m e^eps / (m e^eps + |K| - m) for any domain size.

    Evaluated as a logistic function of the log-odds, so it neither
    overflows for large epsilon nor underflows for astronomically large
    domains such as 2**1024.
    """
    if math.isinf(epsilon):
        return 1.0
    return float(expit(_log_odds(epsilon, m, domain_size)))


def bernoulli_p(cfg: LdpConfig) -> float:
    """Probability that the nearest word survives privatization."""
    if cfg.unbounded:
        return 1.0
    return bernoulli_p_symbolic(cfg.epsilon, cfg.m, cfg.domain_size)


def _log_comb(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def log_subset_probability(Z: Iterable[int], v: int, cfg: LdpConfig) -> float:
    """
    log Pr(Z | v) of the omega-subset mechanism.

    Subsets containing v are equally likely and share probability Pr(u=1);
    subsets without v share Pr(u=0). Normalizing over C(|K|-1, m-1) and
    C(|K|-1, m) subsets respectively makes the distribution sum to one and
    the in/out ratio exactly e^eps.
    """
    subset = np.unique(np.asarray(list(Z), dtype=np.int64))
    K, m = cfg.domain_size, cfg.m
    if subset.size != m:
        raise ValueError(f"Z must hold {m} distinct indices, got {subset.size}")
    if subset[0] < 0 or subset[-1] >= K or not 0 <= v < K:
        raise ValueError("Indices must lie in the domain")
    log_in = -_log_comb(K - 1, m - 1)
    if v in subset:
        if cfg.unbounded:
            return log_in
        return log_in - float(np.logaddexp(0.0, -_log_odds(cfg.epsilon, m, K)))
    if cfg.unbounded or cfg.full_domain:
        return -math.inf
    # C(K-1, m) = C(K-1, m-1) * (K-m) / m
    log_out = log_in - math.log(K - m) + math.log(m)
    return log_out - float(np.logaddexp(0.0, _log_odds(cfg.epsilon, m, K)))


def subset_probability(Z: Iterable[int], v: int, cfg: LdpConfig) -> float:
    """Pr(Z | v) of the omega-subset mechanism."""
    return math.exp(log_subset_probability(Z, v, cfg))


def frequency_oracle_rates(cfg: LdpConfig) -> Tuple[float, float]:
    """(p, q): Pr(v in Z) when the input is v, and when it is some other word."""
    p = bernoulli_p(cfg)
    K = cfg.domain_size
    q = (cfg.m - p) / (K - 1) if K > 1 else 1.0
    return p, q


def estimate_frequencies(reports: Sequence, cfg: LdpConfig) -> np.ndarray:
    """
    Unbiased estimate of the input word frequencies from reported subsets.

    Args:
        reports: Privatized features or index arrays
        cfg: Mechanism settings used to produce the reports

    Returns:
        Estimated frequency per dictionary word (may be slightly negative)
    """
    if not reports:
        raise ValueError("Need at least one report to estimate frequencies")
    K = cfg.domain_size
    counts = np.zeros(K, dtype=np.float64)
    for report in reports:
        indices = report.indices if isinstance(report, PrivatizedFeature) else np.asarray(report)
        counts[indices] += 1
    p, q = frequency_oracle_rates(cfg)
    if math.isclose(p, q):
        raise ValueError("Reports carry no information about the input (p == q)")
    return (counts / len(reports) - q) / (p - q)


def _resolve_rng(cfg: LdpConfig, rng: Optional[RandomSource]) -> RandomSource:
    if rng is None and cfg.rng_seed is None:
        return SecureStream()
    if not config.evaluation_mode and not isinstance(rng, SecureStream):
        raise ConfigurationError("Seeded privatization streams are only allowed in evaluation mode")
    return resolve_stream(cfg.rng_seed if rng is None else rng)


def _sample_excluding(v: int, count: int, domain_size: int, rng: RandomSource) -> List[int]:
    """Partial Fisher-Yates shuffle drawing ``count`` words from K - {v}.

    Only touched positions are stored, so the cost is O(count) whatever the
    domain size.
    """
    pool = domain_size - 1
    swapped = {}
    drawn = []
    for i in range(count):
        j = int(rng.integers(i, pool))
        picked = swapped.get(j, j)
        swapped[j] = swapped.get(i, i)
        drawn.append(picked if picked < v else picked + 1)
    return drawn


def privatize_index(v: int, cfg: LdpConfig, rng: Optional[RandomSource] = None,
                    keypoint: Optional[Tuple[float, float]] = None) -> PrivatizedFeature:
    """
    Report an m-subset for an input that is already a dictionary word.

    Args:
        v: Dictionary index of the nearest word d'
        cfg: Mechanism settings
        rng: Random source; defaults to the secure stream (or cfg.rng_seed)
        keypoint: Keypoint position carried along

    Returns:
        Privatized feature with exactly m distinct indices
    """
    K = cfg.domain_size
    if K < 1:
        raise EmptyDictionary("Cannot privatize against an empty dictionary")
    if not 0 <= v < K:
        raise ValueError(f"Word index {v} outside the domain of size {K}")
    if cfg.full_domain:
        return PrivatizedFeature(indices=np.arange(K), keypoint=keypoint)
    source = _resolve_rng(cfg, rng)
    include = cfg.unbounded or source.random() < bernoulli_p(cfg)
    others = _sample_excluding(v, cfg.m - int(include), K, source)
    indices = others + [v] if include else others
    return PrivatizedFeature(indices=np.asarray(indices), keypoint=keypoint)


def privatize(d, cfg: LdpConfig, rng: Optional[RandomSource] = None,
              keypoint: Optional[Tuple[float, float]] = None) -> PrivatizedFeature:
    """
    Privatize one descriptor with LDP-Feat.

    Step 1 quantizes d to its nearest dictionary word d' (ties by lowest
    index); steps 2-3 report the omega-subset mechanism's output for d'.

    Raises:
        EmptyDictionary: If the configuration carries no dictionary
    """
    if cfg.dictionary is None or cfg.dictionary.size == 0:
        raise EmptyDictionary("LDP-Feat needs a dictionary to quantize descriptors")
    validate_epsilon(cfg.epsilon)
    v, _ = nearest(cfg.dictionary, d)
    return privatize_index(v, cfg, rng, keypoint)


def privatize_image(descriptors, keypoints: Optional[Sequence[Tuple[float, float]]],
                    cfg: LdpConfig, rng: Optional[RandomSource] = None) -> List[PrivatizedFeature]:
    """
    Privatize every keypoint of an image independently.

    Each descriptor gets budget cfg.epsilon on its own; the image as a whole
    is not covered by a single epsilon.
    """
    if cfg.dictionary is None:
        raise EmptyDictionary("LDP-Feat needs a dictionary to quantize descriptors")
    validate_epsilon(cfg.epsilon)
    mat = as_matrix(descriptors)
    if keypoints is not None and len(keypoints) != mat.shape[0]:
        raise ValueError("One keypoint per descriptor is required")
    words, _ = nearest_many(cfg.dictionary, mat)
    source = _resolve_rng(cfg, rng)
    return [
        privatize_index(int(v), cfg, source, None if keypoints is None else tuple(keypoints[i]))
        for i, v in enumerate(words)
    ]


def draw_inclusion(cfg: LdpConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized draws of the Bernoulli u (True means d' is reported)."""
    if cfg.unbounded or cfg.full_domain:
        return np.ones(size, dtype=bool)
    return rng.random(size) < bernoulli_p(cfg)


def _distinct_draws(rows: int, count: int, pool: int, rng: np.random.Generator) -> np.ndarray:
    """Ordered draws of ``count`` distinct values from range(pool), one row each."""
    if count * count < pool // 2:
        draws = rng.integers(0, pool, size=(rows, count))
        while True:
            ordered = np.sort(draws, axis=1)
            clash = np.any(ordered[:, 1:] == ordered[:, :-1], axis=1)
            if not clash.any():
                return draws
            draws[clash] = rng.integers(0, pool, size=(int(clash.sum()), count))
    keys = rng.random((rows, pool))
    if count < pool:
        smallest = np.argpartition(keys, count - 1, axis=1)[:, :count]
    else:
        smallest = np.tile(np.arange(pool), (rows, 1))
    order = np.argsort(np.take_along_axis(keys, smallest, axis=1), axis=1)
    return np.take_along_axis(smallest, order, axis=1)


def sample_subsets(v: int, cfg: LdpConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Vectorized mechanism output for a fixed input word.

    Each row draws an ordered sample of m distinct words from K - {v}; the
    first m - u of them form a uniform (m - u)-subset and v fills the last
    slot when u = 1. Same distribution as privatize_index.

    Returns:
        (size, m) array of sorted indices
    """
    K, m = cfg.domain_size, cfg.m
    if cfg.full_domain:
        return np.tile(np.arange(K), (size, 1))
    include = draw_inclusion(cfg, size, rng)
    out = np.empty((size, m), dtype=np.int64)
    rows_per_block = max(1, _BLOCK_CELLS // max(m, K - 1))
    for start in range(0, size, rows_per_block):
        stop = min(size, start + rows_per_block)
        ranked = _distinct_draws(stop - start, m, K - 1, rng)
        words = np.where(ranked < v, ranked, ranked + 1)
        words[include[start:stop], m - 1] = v
        out[start:stop] = words
    out.sort(axis=1)
    return out
