"""Empirical verification of the epsilon-LDP guarantee.

Every dictionary word is fed to the mechanism ``trials`` times, the reported
subsets are counted per cell (input word x output subset) and the empirical
distributions are compared pairwise under Bonferroni-corrected Wilson
intervals.
"""

import math
from concurrent.futures import Executor
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

from ..config import config
from ..models.privacy import LdpConfig, LdpVerdict
from ..utils.exceptions import DomainTooLarge, EmptyDictionary
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream, derive_seed
from .dictionary import nearest_many
from .ldp import log_subset_probability, sample_subsets

logger = get_logger(__name__)

MAX_ENUMERABLE_OUTPUTS = 10_000

Sampler = Callable[[int, LdpConfig, int, np.random.Generator], np.ndarray]

SCENARIOS = ('in_in', 'out_in', 'in_out', 'out_out')


def subset_ranks(subsets: np.ndarray, domain_size: int) -> np.ndarray:
    """Combinatorial-number-system rank of each sorted row, in [0, C(K, m))."""
    m = subsets.shape[1]
    table = np.array(
        [[math.comb(z, i + 1) for i in range(m)] for z in range(domain_size)],
        dtype=np.int64,
    )
    return table[subsets, np.arange(m)].sum(axis=1)


def subset_membership(domain_size: int, m: int) -> np.ndarray:
    """Boolean (C(K, m), K) matrix: row r marks the words of the subset ranked r."""
    cells = math.comb(domain_size, m)
    member = np.zeros((cells, domain_size), dtype=bool)
    # colex enumeration matches subset_ranks
    subset = list(range(m))
    for rank in range(cells):
        member[rank, subset] = True
        i = 0
        while i < m - 1 and subset[i] + 1 == subset[i + 1]:
            subset[i] = i
            i += 1
        subset[i] += 1
    return member


def wilson_interval(counts: np.ndarray, n: int, z: float):
    """Wilson score interval for binomial proportions."""
    phat = counts / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


def _safe_ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return math.inf if num > 0 else 1.0


def analytic_worst_ratio(cfg: LdpConfig) -> float:
    """Largest exact Pr(Z|v1) / Pr(Z|v2) of the mechanism, by enumeration."""
    K, m = cfg.domain_size, cfg.m
    if cfg.full_domain:
        return 1.0
    cells = math.comb(K, m)
    if cells > MAX_ENUMERABLE_OUTPUTS:
        raise DomainTooLarge(f"C({K}, {m}) = {cells} outputs cannot be enumerated")
    worst = -math.inf
    member = subset_membership(K, m)
    for row in member:
        Z = np.flatnonzero(row)
        logs = [log_subset_probability(Z, v, cfg) for v in range(K)]
        worst = max(worst, max(logs) - min(logs))
    return math.exp(worst)


def _count_outputs(v: int, cfg: LdpConfig, trials: int, seed: int, sampler: Sampler) -> np.ndarray:
    subsets = np.asarray(sampler(v, cfg, trials, counter_stream(seed, v)))
    subsets = np.sort(subsets, axis=1)
    return np.bincount(subset_ranks(subsets, cfg.domain_size),
                       minlength=math.comb(cfg.domain_size, cfg.m))


def verify_ldp(cfg: LdpConfig, trials: int,
               rng: Optional[Union[int, np.random.Generator]] = None,
               sampler: Optional[Sampler] = None,
               confidence: float = 0.99,
               executor: Optional[Executor] = None) -> LdpVerdict:
    """
    Check Pr(Z|x1) <= e^eps Pr(Z|x2) empirically for every pair of inputs.

    The raw inputs are the dictionary entries themselves; each is quantized
    by nearest neighbor before sampling, so the check covers the whole
    privatize path. A pair fails when the lower Wilson bound for x1 exceeds
    e^eps times the upper bound for x2 in some cell.

    Args:
        cfg: Mechanism settings; C(|K|, m) must not exceed 10**4
        trials: Mechanism runs per input
        rng: Seed or generator for the per-input streams
        sampler: Replacement mechanism with the sample_subsets signature
        confidence: Family-wise confidence of the interval test
        executor: Optional pool used to sample inputs concurrently

    Returns:
        The verdict, including the worst empirical ratio and the pooled
        ratios of the four inclusion scenarios

    Raises:
        DomainTooLarge: If the output space is not enumerable
        EmptyDictionary: If cfg has no dictionary
    """
    if cfg.dictionary is None:
        raise EmptyDictionary("Verification feeds dictionary entries as raw inputs")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    K, m = cfg.domain_size, cfg.m
    cells = math.comb(K, m)
    if cells > MAX_ENUMERABLE_OUTPUTS:
        raise DomainTooLarge(f"C({K}, {m}) = {cells} outputs exceed {MAX_ENUMERABLE_OUTPUTS}")
    sampler = sampler or sample_subsets
    if rng is None:
        rng = counter_stream(0)
    seed = int(rng) if isinstance(rng, (int, np.integer)) else derive_seed(rng)

    words, _ = nearest_many(cfg.dictionary, cfg.dictionary.vectors())
    logger.info(f"Verifying eps={cfg.epsilon}, m={m}, |K|={K}: {cells} outputs x {trials} trials")

    if executor is not None:
        futures = [executor.submit(_count_outputs, int(v), cfg, trials, seed, sampler) for v in words]
        counts = np.vstack([f.result() for f in futures])
    else:
        counts = np.vstack([
            _count_outputs(int(v), cfg, trials, seed, sampler)
            for v in tqdm(words, desc="verify-ldp", disable=not config.show_progress)
        ])

    z = float(norm.ppf(1 - (1 - confidence) / (2 * counts.size)))
    phat = counts / trials
    lower, upper = wilson_interval(counts, trials, z)
    bound = math.exp(cfg.epsilon) if not cfg.unbounded else math.inf

    passed = True
    worst = 0.0
    max_tv = 0.0
    for i in range(K):
        others = np.arange(K) != i
        if not cfg.unbounded and np.any(lower[i][None, :] > bound * upper[others]):
            passed = False
        with np.errstate(divide='ignore', invalid='ignore'):
            ratios = np.where(phat[others] > 0, phat[i][None, :] / phat[others],
                              np.where(phat[i][None, :] > 0, np.inf, 0.0))
        worst = max(worst, float(ratios.max()))
        max_tv = max(max_tv, float(0.5 * np.abs(phat[i][None, :] - phat[others]).sum(axis=1).max()))

    scenario_ratios, scenario_passed = _scenario_check(cfg, words, phat, lower, upper)
    observed = phat > 0
    slack = float(np.max(upper[observed] / phat[observed])) - 1.0 if observed.any() else math.inf

    verdict = LdpVerdict(
        passed=passed and scenario_passed,
        worst_ratio=worst,
        bound=bound,
        slack=slack,
        max_total_variation=max_tv,
        scenario_ratios=scenario_ratios,
        scenario_passed=scenario_passed,
        cells=int(counts.size),
        trials=trials,
    )
    level = logger.info if verdict.passed else logger.warning
    level(f"LDP verification {'passed' if verdict.passed else 'FAILED'}: worst ratio {worst:.4f} vs bound {bound:.4f}")
    return verdict


def _scenario_check(cfg: LdpConfig, words: np.ndarray, phat: np.ndarray,
                    lower: np.ndarray, upper: np.ndarray):
    """Pooled Pr(Z|x1)/Pr(Z|x2) for each inclusion scenario of (d1', d2') in Z.

    The exact ratios are 1 (both in or both out), e^-eps (only d2' in) and
    e^eps (only d1' in). A scenario passes when its exact ratio lies within
    the pooled interval bounds.
    """
    K, m = cfg.domain_size, cfg.m
    member = subset_membership(K, m)
    expected = {
        'in_in': 1.0,
        'out_out': 1.0,
        'out_in': 0.0 if cfg.unbounded else math.exp(-cfg.epsilon),
        'in_out': math.inf if cfg.unbounded else math.exp(cfg.epsilon),
    }
    sums: Dict[str, np.ndarray] = {key: np.zeros(6) for key in SCENARIOS}
    for i in range(K):
        for j in range(K):
            if i == j or words[i] == words[j]:
                continue
            in1 = member[:, words[i]]
            in2 = member[:, words[j]]
            masks = {
                'in_in': in1 & in2,
                'out_in': ~in1 & in2,
                'in_out': in1 & ~in2,
                'out_out': ~in1 & ~in2,
            }
            for key, mask in masks.items():
                if not mask.any():
                    continue
                sums[key] += (phat[i, mask].sum(), phat[j, mask].sum(),
                              lower[i, mask].sum(), upper[i, mask].sum(),
                              lower[j, mask].sum(), upper[j, mask].sum())

    ratios: Dict[str, float] = {}
    passed = True
    for key in SCENARIOS:
        p1, p2, lo1, up1, lo2, up2 = sums[key]
        if p1 == 0 and p2 == 0 and up1 == 0 and up2 == 0:
            continue
        ratios[key] = _safe_ratio(p1, p2)
        low, high = _safe_ratio(lo1, up2), _safe_ratio(up1, lo2)
        if lo1 == 0:
            low = 0.0
        if not low <= expected[key] <= high:
            logger.debug(f"Scenario {key}: expected {expected[key]} outside [{low}, {high}]")
            passed = False
    return ratios, passed
