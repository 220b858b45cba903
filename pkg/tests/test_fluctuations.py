#!/usr/bin/env python3
"""
Unit Tests for path functionals and fluctuation estimators
Grid paths, passages, ladders, two-sided exit, renewal counts and range survival
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import math

import numpy as np
import pytest

from services.cadlag import CadlagGrid
from services.environment import StepModel
from services.fluctuations import (
    Direction, ExitSide, ExitVariant, RangeCounts, backward_exit_outcome, estimate_exit_probability,
    estimate_killed_exit, estimate_range_decay, fit_range_decay,
    first_passage, ladder_decomposition, merge_range_counts, range_survival_counts, reflected_range,
    renewal_estimate, running_extrema, sample_passage_times, tilde_G, undershoot_U, exit_outcome,
)
from services.mittag_leffler import exit_two_sided
from services.stable_core import StableLaw
from utils import DomainError, NotAttained, PartialLadder, RangeError, Undecided, derive_stream


@pytest.fixture
def two_sided_path():
    """Forward values 0, 1, -1, 2 and backward values 0, -1, 3"""
    return CadlagGrid.from_values([0, 1, -1, 2], [0, -1, 3])


# ========================================
# Grid paths
# ========================================

def test_cadlag_side_conventions(two_sided_path):
    test_cases = [
        (0.5, 0.0),
        (1.0, 1.0),
        (2.5, -1.0),
        (3.0, 2.0),
        (-0.5, 0.0),
        (-1.0, -1.0),
        (-1.5, -1.0),
        (-2.0, 3.0),
    ]
    for t, expected in test_cases:
        assert two_sided_path.value_at(t) == expected, f"Z({t})"
    assert two_sided_path.span == (-2.0, 3.0)
    with pytest.raises(RangeError):
        two_sided_path.value_at(3.5)


def test_cadlag_window(two_sided_path):
    assert two_sided_path.window(1.5).tolist() == [0.0, 1.0]
    assert two_sided_path.window(-1.5).tolist() == [0.0, -1.0]
    assert two_sided_path.window(0.0).tolist() == [0.0]


def test_cadlag_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        CadlagGrid(np.array([0.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError, match="start at 0"):
        CadlagGrid(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="time 0"):
        CadlagGrid(np.array([1.0, 2.0]), np.array([0.0, 1.0]))


# ========================================
# Functionals
# ========================================

def test_functionals_on_a_known_path(two_sided_path):
    """Each case: (description, computed, expected)"""
    print("\n" + "=" * 80)
    print("🧪 TEST: path functionals")
    print("=" * 80)

    test_cases = [
        ("running sup on [0, 1.5]", running_extrema(two_sided_path, 1.5).sup, 1.0),
        ("running inf on [0, 3]", running_extrema(two_sided_path, 3.0).inf, -1.0),
        ("sup |Z| on [-2, 0]", running_extrema(two_sided_path, -2.0).sup_abs, 3.0),
        ("reflected value at 3", reflected_range(two_sided_path, 3.0).z_r, 3.0),
        ("Z# at 2", reflected_range(two_sided_path, 2.0).z_sharp, 1.0),
        ("forward passage of 2", first_passage(two_sided_path, 2.0), 3.0),
        ("backward passage of -1", first_passage(two_sided_path, -1.0, Direction.BACKWARD), 1.0),
        ("unreached level", first_passage(two_sided_path, 5.0), math.inf),
        ("forward undershoot at 2", undershoot_U(two_sided_path, 2.0), 3.0),
        ("backward undershoot at 2", undershoot_U(two_sided_path, 2.0, 'backward'), 3.0),
        ("tilde G at 3", tilde_G(two_sided_path, 3.0), 3.0),
    ]
    for description, computed, expected in test_cases:
        assert computed == expected, description
        print(f"   ✅ {description}: {computed}")


def test_functional_errors(two_sided_path):
    with pytest.raises(DomainError):
        undershoot_U(two_sided_path, -1.0)
    with pytest.raises(NotAttained, match="not attained"):
        undershoot_U(two_sided_path, 5.0)
    with pytest.raises(DomainError):
        tilde_G(two_sided_path, -1.0)


# ========================================
# Ladders and renewal counts
# ========================================

def test_ladder_decomposition_example():
    ladder = ladder_decomposition([-1, 2, -3], 2)
    assert ladder.T.tolist() == [0, 1, 3]
    assert ladder.H.tolist() == [0.0, 1.0, 2.0]
    assert ladder.M.tolist() == [0.0, 2.0]
    assert ladder.n_ladders == 2 and ladder.complete


def test_partial_ladder_carries_what_was_found():
    with pytest.raises(PartialLadder) as excinfo:
        ladder_decomposition([-1, 1, 1], 3)
    assert excinfo.value.found == 1
    assert excinfo.value.partial.T.tolist() == [0, 1]
    assert not excinfo.value.partial.complete


def test_renewal_count_for_unit_steps():
    """Unit ladder heights: U_H(5.5) counts H = 0..5 on every path"""
    estimate = renewal_estimate(StepModel.simple_random_walk(), 5.5, 200, derive_stream(11, 'renewal'))
    assert estimate.mean == 6.0
    assert estimate.std_error == 0.0
    assert estimate.n + estimate.meta['truncated'] == 200


def test_renewal_rejects_nonpositive_level():
    with pytest.raises(DomainError):
        renewal_estimate(StepModel.simple_random_walk(), 0.0, 10, derive_stream(1))


# ========================================
# Two-sided exit
# ========================================

@pytest.mark.parametrize("steps, variant, expected", [
    ([1, 1, 1], 'open', ExitSide.UP_FIRST),
    ([1, 1, 1], 'closed', ExitSide.UP_FIRST),
    ([-1, -1], 'open', ExitSide.DOWN_FIRST),
    ([1, -3, 5], 'open', ExitSide.DOWN_FIRST),
    ([-1, 4], 'closed', ExitSide.DOWN_FIRST),
])
def test_exit_outcome_vectorized_and_lazy(steps, variant, expected):
    """Lists are scanned vectorized, generators lazily; both agree"""
    assert exit_outcome(steps, 1.0, 2.0, variant) == expected
    assert exit_outcome(iter(steps), 1.0, 2.0, variant) == expected


def test_exit_outcome_undecided_and_domain():
    with pytest.raises(Undecided):
        exit_outcome([-1.0], 1.0, 2.0, ExitVariant.OPEN)
    with pytest.raises(Undecided):
        exit_outcome(iter([0.5, -0.5]), 1.0, 2.0)
    with pytest.raises(DomainError):
        exit_outcome([1.0], 0.0, 2.0)


def test_backward_exit_negates_steps():
    assert backward_exit_outcome([1.0, 1.0], 1.0, 2.0) == ExitSide.DOWN_FIRST
    assert backward_exit_outcome(iter([-2.0]), 1.0, 2.0) == ExitSide.UP_FIRST


@pytest.mark.parametrize("variant, expected", [
    ('open', 3.0 / 7.0),    # reach 4 before -3
    ('closed', 2.0 / 5.0),  # reach 3 before -2
])
def test_simple_random_walk_exit(variant, expected):
    estimate = estimate_exit_probability(StepModel.simple_random_walk(), 2.0, 3.0, 20_000,
                                         derive_stream(12, 'exit', variant), variant)
    assert estimate.meta['undecided'] == 0
    assert estimate.agrees_with(expected, sigmas=4.0)


def test_killed_brownian_exit():
    """Exit of (-1, 1) before an Exp(1) clock: survival 1 - 1/cosh(1)"""
    killed = estimate_killed_exit(StableLaw.gaussian(), -1.0, 1.0, 1.0, 4000, 64, derive_stream(13, 'killed'))
    total = killed.survive.mean + killed.exit_low.mean + killed.exit_high.mean
    assert total == pytest.approx(1.0)
    assert killed.survive.agrees_with(1.0 - 1.0 / math.cosh(1.0), sigmas=4.0, floor=0.02)
    assert killed.exit_low.mean == pytest.approx(killed.exit_high.mean, abs=0.06)


def test_killed_exit_matches_the_closed_form_barrier():
    """From 0 in (-3/4, 1/4) the lower barrier is the far one"""
    killed = estimate_killed_exit(StableLaw.gaussian(), -0.75, 0.25, 1.0, 4000, 1024,
                                  derive_stream(13, 'barrier'))
    closed = exit_two_sided(2.0, 1.0, 0.25)
    assert killed.exit_low.agrees_with(closed.p_exit_low, sigmas=4.0, floor=0.02)
    assert killed.survive.agrees_with(closed.p_survive, sigmas=4.0, floor=0.02)


def test_killed_exit_domain():
    with pytest.raises(DomainError):
        estimate_killed_exit(StableLaw.gaussian(), 0.5, 1.0, 1.0, 10, 8, derive_stream(1))
    with pytest.raises(DomainError):
        estimate_killed_exit(StableLaw.gaussian(), -1.0, 1.0, 0.0, 10, 8, derive_stream(1))


def test_passage_times_resolve():
    sample = sample_passage_times(StableLaw.gaussian(), 256, 500, derive_stream(14, 'passage'))
    assert sample.exceeded == 0
    assert sample.times.size == 500
    assert np.all(sample.times > 0)


# ========================================
# Range survival
# ========================================

def test_range_survival_of_unit_steps():
    """With x = 1/2 a path survives only by stepping down every time: P = 2^-v"""
    counts = range_survival_counts(StepModel.simple_random_walk(), 0.5, [3, 1, 2], 4000,
                                   derive_stream(15, 'range'), bar=0.0)
    assert counts.v_points.tolist() == [1, 2, 3]
    assert np.all(np.diff(counts.survivors) <= 0)
    np.testing.assert_array_equal(counts.joint, counts.survivors)
    for v, survived in zip(counts.v_points, counts.survivors):
        expected = 2.0 ** -v
        se = math.sqrt(expected * (1 - expected) / 4000)
        assert abs(survived / 4000 - expected) <= 4 * se


def test_merge_range_counts():
    model = StepModel.simple_random_walk()
    first = range_survival_counts(model, 2.0, [4, 8], 100, derive_stream(16, 0))
    second = range_survival_counts(model, 2.0, [4, 8], 50, derive_stream(16, 1))
    merged = merge_range_counts([first, second])
    assert merged.n_paths == 150
    np.testing.assert_array_equal(merged.survivors, first.survivors + second.survivors)

    other_grid = range_survival_counts(model, 2.0, [4, 9], 10, derive_stream(16, 2))
    with pytest.raises(ValueError, match="different v grids"):
        merge_range_counts([first, other_grid])
    with pytest.raises(ValueError, match="no range counts"):
        merge_range_counts([])


# ========================================
# Range decay fits
# ========================================

def _counts(survivors, v_points=(1, 2, 4), n_paths=1000):
    survivors = np.array(survivors)
    return RangeCounts(np.array(v_points), n_paths, survivors, survivors.copy())


def test_range_decay_slope_and_one_sided_point():
    """x = 1 puts v on its own scale; the slope is log(p1 / p2) between the two usable points"""
    decay = fit_range_decay(StepModel.simple_random_walk(), 1.0, _counts([500, 60, 0]), seed=5)
    assert decay.slope.mean == pytest.approx(math.log(0.5 / 0.06))
    # nested indicators: w = (-1, 1), Var = (1/0.5 - 1 - 2 (1/0.5 - 1) + 1/0.06 - 1) / n
    assert decay.slope.std_error == pytest.approx(math.sqrt((1.0 / 0.06 - 2.0) / 1000))
    assert decay.slope.meta['points_used'] == 2

    last = decay.pointwise[-1]
    assert last.one_sided
    assert last.probability.mean == 0.0
    assert last.probability.meta['upper_bound'] == pytest.approx(1.0 / 1000)
    assert not any(point.one_sided for point in decay.pointwise[:2])


def test_range_decay_uses_only_points_with_enough_survivors():
    decay = fit_range_decay(StepModel.simple_random_walk(), 1.0, _counts([500, 60, 49], (1, 2, 3)), seed=5)
    assert decay.slope.meta['points_used'] == 2
    assert decay.slope.meta['min_survivors'] == 50
    assert decay.slope.mean == pytest.approx(math.log(0.5 / 0.06))
    assert not decay.pointwise[-1].one_sided

    stricter = fit_range_decay(StepModel.simple_random_walk(), 1.0, _counts([500, 60, 49], (1, 2, 3)), seed=5,
                               min_survivors=100)
    assert stricter.slope.meta['points_used'] == 1


def test_range_decay_with_too_few_points():
    decay = fit_range_decay(StepModel.simple_random_walk(), 1.0, _counts([500, 10, 0]), seed=5)
    assert math.isnan(decay.slope.mean)
    assert decay.slope.std_error == math.inf
    assert len(decay.pointwise) == 3


def test_estimate_range_decay_on_zero_potential():
    """V stays at 0, so every path survives and -log P is flat"""
    decay = estimate_range_decay(StepModel.balanced(), 1.0, [1, 2, 4, 8], 100, derive_stream(17, 'flat'))
    assert decay.slope.mean == pytest.approx(0.0, abs=1e-12)
    assert decay.slope.std_error == 0.0
    assert decay.slope.seed == 17
    assert all(point.survivors == 100 for point in decay.pointwise)


def test_estimate_range_decay_grid_requirements():
    """Each case: (v_grid, message fragment)"""
    print("\n" + "=" * 80)
    print("🧪 TEST: range decay grid validation")
    print("=" * 80)

    test_cases = [
        ([4, 8], "factor of 4"),
        ([8, 4, 32], "increasing"),
        ([0, 4, 16], "increasing"),
        ([5], "increasing"),
    ]
    for v_grid, message in test_cases:
        with pytest.raises(DomainError, match=message):
            estimate_range_decay(StepModel.simple_random_walk(), 1.0, v_grid, 10, derive_stream(18))
        print(f"   ✅ {v_grid}: {message}")


if __name__ == "__main__":
    pytest.main([__file__])
