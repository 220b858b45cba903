#!/usr/bin/env python3
"""
Unit Tests for the walk in a random environment
Quenched paths, transition frequencies, annealed suprema, envelope tables and liminf classifiers
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import logging
import math

import numpy as np
import pytest

from services.environment import Environment, StepModel
from services.rwre import (
    Classification, SupProfile, WalkStats, annealed_sup_distribution, annealed_sup_profile, default_span,
    envelope_diagnostic, envelope_table, merge_profiles,
    normalized_sample, quantile_ci, rwre_path, rwre_trajectory, theorem2b_classifier, theorem_classifiers,
    transition_counts,
)
from utils import DomainError, RangeError, derive_stream


@pytest.fixture
def valley_environment():
    """V(x) = log(3) |x|: omega = 1/4 right of 0 and 3/4 left of 0"""
    return Environment(np.full(50, math.log(3.0)), np.full(50, math.log(3.0)))


# ========================================
# Quenched walks
# ========================================

def test_balanced_walk_parity():
    path = rwre_path(Environment(np.zeros(50), np.zeros(50)), 40, derive_stream(41, 'parity'))
    assert path[0] == 0
    assert np.all(np.abs(np.diff(path)) == 1)
    assert np.all(path % 2 == np.arange(41) % 2)


def test_trajectory_of_zero_steps():
    stats = rwre_trajectory(Environment(np.zeros(4), np.zeros(4)), 0, derive_stream(0))
    assert stats == WalkStats(n=0, final=0, max=0, min=0, max_abs=0)


def test_trajectory_matches_its_path():
    env = Environment(np.zeros(100), np.zeros(100))
    path = rwre_path(env, 200, derive_stream(42))
    stats = rwre_trajectory(env, 200, derive_stream(42))
    assert stats.final == path[-1]
    assert stats.max == path.max() and stats.min == path.min()
    assert stats.max_abs == max(stats.max, -stats.min)


def test_transition_frequencies_follow_omega(valley_environment):
    sites, visits, right_steps = transition_counts(valley_environment, 20_000, derive_stream(43, 'valley'))
    assert visits.sum() == 20_000
    positive = sites > 0
    negative = sites < 0
    assert right_steps[positive].sum() / visits[positive].sum() == pytest.approx(0.25, abs=0.03)
    assert right_steps[negative].sum() / visits[negative].sum() == pytest.approx(0.75, abs=0.03)


def test_walk_leaving_the_environment():
    with pytest.raises(RangeError, match="outside environment span"):
        rwre_path(Environment(np.zeros(2), np.zeros(2)), 1000, derive_stream(44))
    with pytest.raises(ValueError):
        rwre_path(Environment(np.zeros(2), np.zeros(2)), -1, derive_stream(44))


# ========================================
# Annealed suprema
# ========================================

def test_annealed_profile_shape_and_monotonicity():
    model = StepModel.sinai_symmetric()
    profile = annealed_sup_profile(model, [256, 64], 50, derive_stream(45, 'profile'), span=16, batch_size=20)
    assert profile.checkpoints == (64, 256)
    assert profile.sups.shape == (50, 2)
    assert len(profile.span_doublings) == 3
    assert np.all(profile.sups >= 0)
    assert np.all(profile.at(256) >= profile.at(64))

    sample = normalized_sample(model, profile, 256)
    assert sample.normalization == pytest.approx(math.log(256) ** 2)
    np.testing.assert_allclose(sample.values, profile.at(256) / math.log(256) ** 2)


def test_annealed_profile_is_reproducible():
    model = StepModel.simple_random_walk()
    first = annealed_sup_profile(model, [100], 10, derive_stream(46))
    second = annealed_sup_profile(model, [100], 10, derive_stream(46))
    np.testing.assert_array_equal(first.sups, second.sups)


def test_annealed_sup_distribution_sample():
    model = StepModel.sinai_symmetric()
    sample = annealed_sup_distribution(model, 1000, 8, derive_stream(48, 'annealed'), batch_size=4)
    assert sample.seed == 48
    assert sample.n == 1000
    assert sample.values.shape == (8,)
    assert np.all(sample.values >= 0)
    assert sample.normalization == pytest.approx(math.log(1000) ** 2)
    assert len(sample.meta['span_doublings']) == 2
    with pytest.raises(DomainError, match="n must be"):
        annealed_sup_distribution(model, 0, 8, derive_stream(48))


def test_annealed_sup_distribution_warns_below_a_thousand_steps(caplog):
    model = StepModel.simple_random_walk()
    with caplog.at_level(logging.WARNING, logger='services.rwre'):
        annealed_sup_distribution(model, 100, 4, derive_stream(49))
    assert "meant for n >= 1000" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING, logger='services.rwre'):
        annealed_sup_distribution(model, 1000, 2, derive_stream(49))
    assert "meant for n >= 1000" not in caplog.text


def test_annealed_profile_arguments():
    model = StepModel.simple_random_walk()
    with pytest.raises(DomainError, match="positive horizons"):
        annealed_sup_profile(model, [0, 10], 5, derive_stream(1))
    with pytest.raises(DomainError, match="n_walks"):
        annealed_sup_profile(model, [10], 0, derive_stream(1))


def test_merge_profiles():
    model = StepModel.simple_random_walk()
    first = annealed_sup_profile(model, [32, 64], 6, derive_stream(47, 0))
    second = annealed_sup_profile(model, [32, 64], 4, derive_stream(47, 1))
    merged = merge_profiles([first, second])
    assert merged.n_walks == 10
    np.testing.assert_array_equal(merged.sups[6:], second.sups)

    other = annealed_sup_profile(model, [32], 2, derive_stream(47, 2))
    with pytest.raises(ValueError, match="different checkpoints"):
        merge_profiles([first, other])


def test_default_span_grows_with_n():
    assert default_span(1) == 8
    assert default_span(10_000) > default_span(1000)


# ========================================
# Envelope tables
# ========================================

def test_envelope_table_rows():
    sups = np.column_stack([np.arange(100), 2 * np.arange(100)])
    profile = SupProfile((16, 64), sups, 0, (0,), 0)
    rows = envelope_table(StepModel.simple_random_walk(), profile, betas=(0.0, 1.0), levels=(0.5,))
    assert len(rows) == 4
    assert [(row.n, row.beta) for row in rows] == [(16, 0.0), (16, 1.0), (64, 0.0), (64, 1.0)]
    assert rows[0].quantiles[0] == pytest.approx(49.5 / math.log(16) ** 2)
    assert rows[1].quantiles[0] == pytest.approx(49.5 * math.log(math.log(16)) / math.log(16) ** 2)
    for row in rows:
        assert row.ci_low[0] <= row.quantiles[0] <= row.ci_high[0]


def test_envelope_table_needs_large_checkpoints():
    profile = SupProfile((8, 64), np.ones((5, 2)), 0, (0,), 0)
    with pytest.raises(DomainError, match="16 or more"):
        envelope_table(StepModel.simple_random_walk(), profile)


def test_envelope_diagnostic_shape_and_order():
    betas = (0.0, 1.0)
    levels = (0.1, 0.25, 0.5, 0.75, 0.9)
    rows = envelope_diagnostic(StepModel.sinai_symmetric(), [64, 32], 40, derive_stream(50, 'envelope'),
                               betas=betas, levels=levels, span=16, batch_size=20)
    assert len(rows) == 2 * len(betas)
    assert [(row.n, row.beta) for row in rows] == [(32, 0.0), (32, 1.0), (64, 0.0), (64, 1.0)]
    for row in rows:
        assert row.levels == levels
        assert all(value >= 0 for value in row.quantiles)
        assert list(row.quantiles) == sorted(row.quantiles)
        assert list(row.lll_quantiles) == sorted(row.lll_quantiles)


def test_quantile_ci_brackets_the_estimate():
    estimate, low, high = quantile_ci(np.arange(1000), 0.5)
    assert estimate == 499.5
    assert low < estimate < high
    assert high - low < 100


# ========================================
# liminf classifiers
# ========================================

def test_classifiers():
    """Each case: (description, computed, expected)"""
    print("\n" + "=" * 80)
    print("🧪 TEST: liminf classifiers")
    print("=" * 80)

    test_cases = [
        ("below 1/q", theorem_classifiers(1.0, 0.5), Classification.ZERO),
        ("at 1/q with normal attraction", theorem_classifiers(2.0, 0.5), Classification.INFINITE),
        ("at 1/q otherwise", theorem_classifiers(2.0, 0.5, normal_attraction=False), Classification.UNDETERMINED),
        ("above 1/q", theorem_classifiers(2.5, 0.5), Classification.INFINITE),
        ("skewed law below 1/q", theorem_classifiers(2.5, 1.0 / 3.0), Classification.ZERO),
        ("two-sided at 1/2", theorem2b_classifier(0.5), Classification.ZERO),
        ("two-sided above 1/2", theorem2b_classifier(0.6), Classification.INFINITE),
    ]
    for description, computed, expected in test_cases:
        assert computed == expected, description
        print(f"   ✅ {description}: {computed.value}")


def test_classifier_domain():
    with pytest.raises(DomainError):
        theorem_classifiers(-1.0, 0.5)
    with pytest.raises(DomainError):
        theorem_classifiers(1.0, 1.0)
    with pytest.raises(DomainError):
        theorem2b_classifier(-0.1)


if __name__ == "__main__":
    pytest.main([__file__])
