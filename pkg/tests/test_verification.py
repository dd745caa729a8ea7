import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import cosine_dictionary
from src.models import LdpConfig
from src.services.ldp import sample_subsets
from src.services.verification import (
    analytic_worst_ratio,
    subset_membership,
    subset_ranks,
    verify_ldp,
    wilson_interval,
)
from src.utils import DomainTooLarge, EmptyDictionary, counter_stream


def always_include(v, cfg, size, rng):
    """A broken mechanism that reports the true word every time."""
    leaky = LdpConfig(epsilon=math.inf, m=cfg.m, domain_size_override=cfg.domain_size)
    return sample_subsets(v, leaky, size, rng)


def test_membership_rows_are_ranked_in_order():
    member = subset_membership(6, 2)
    assert member.shape == (15, 6)
    assert np.all(member.sum(axis=1) == 2)
    subsets = np.vstack([np.flatnonzero(row) for row in member])
    assert_array_equal(subset_ranks(subsets, 6), np.arange(15))


def test_wilson_interval_brackets_the_estimate():
    counts = np.array([0, 10, 500, 1000])
    lower, upper = wilson_interval(counts, 1000, 2.58)
    phat = counts / 1000
    assert np.all(lower <= phat) and np.all(phat <= upper)
    assert lower[0] == 0.0 and upper[-1] == 1.0


@pytest.mark.parametrize("size", [6, 8])
@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("epsilon", [0.5, 1.0, 2.0])
def test_analytic_worst_ratio_is_exactly_e_to_the_epsilon(size, m, epsilon):
    cfg = LdpConfig(epsilon=epsilon, m=m, domain_size_override=size)
    assert math.log(analytic_worst_ratio(cfg)) == pytest.approx(epsilon, abs=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("epsilon", [0.5, 1.0, 2.0])
def test_analytic_worst_ratio_on_a_larger_domain(m, epsilon):
    cfg = LdpConfig(epsilon=epsilon, m=m, domain_size_override=64)
    assert math.log(analytic_worst_ratio(cfg)) == pytest.approx(epsilon, abs=1e-12)


def test_verify_ldp_passes_for_the_mechanism(small_dictionary):
    cfg = LdpConfig(epsilon=1.0, m=2, dictionary=small_dictionary)
    verdict = verify_ldp(cfg, 100_000, rng=5)
    assert verdict.passed
    assert verdict.scenario_passed
    assert verdict.bound == pytest.approx(math.e)
    assert verdict.worst_ratio <= verdict.bound * (1 + 2 * verdict.slack)
    assert verdict.cells == 6 * 15
    assert set(verdict.scenario_ratios) == {'in_in', 'out_in', 'in_out', 'out_out'}
    assert verdict.scenario_ratios['in_out'] == pytest.approx(math.e, rel=0.05)
    assert verdict.scenario_ratios['in_in'] == pytest.approx(1.0, rel=0.05)


def test_zero_epsilon_makes_outputs_indistinguishable(small_dictionary):
    cfg = LdpConfig(epsilon=0.0, m=2, dictionary=small_dictionary)
    verdict = verify_ldp(cfg, 100_000, rng=6)
    assert verdict.passed
    assert verdict.max_total_variation < 0.02


def test_broken_sampler_is_detected(small_dictionary):
    cfg = LdpConfig(epsilon=1.0, m=2, dictionary=small_dictionary)
    verdict = verify_ldp(cfg, 20_000, rng=7, sampler=always_include)
    assert not verdict.passed
    assert verdict.worst_ratio > math.e


def test_verification_is_replayable_with_a_pool(small_dictionary):
    cfg = LdpConfig(epsilon=1.0, m=2, dictionary=small_dictionary)
    inline = verify_ldp(cfg, 5000, rng=9)
    with ThreadPoolExecutor(max_workers=3) as pool:
        pooled = verify_ldp(cfg, 5000, rng=9, executor=pool)
    assert inline.to_dict() == pooled.to_dict()


def test_domain_too_large():
    dictionary = cosine_dictionary(counter_stream(2), 200, 8)
    cfg = LdpConfig(epsilon=1.0, m=3, dictionary=dictionary)
    with pytest.raises(DomainTooLarge):
        verify_ldp(cfg, 10)
    with pytest.raises(DomainTooLarge):
        analytic_worst_ratio(cfg)


def test_verification_needs_dictionary_inputs():
    with pytest.raises(EmptyDictionary):
        verify_ldp(LdpConfig(epsilon=1.0, m=2, domain_size_override=6), 10)


@pytest.mark.slow
def test_verify_ldp_million_trials(small_dictionary):
    cfg = LdpConfig(epsilon=1.0, m=2, dictionary=small_dictionary)
    verdict = verify_ldp(cfg, 1_000_000, rng=10)
    assert verdict.passed
    assert verdict.worst_ratio <= math.e * (1 + 2 * verdict.slack)
