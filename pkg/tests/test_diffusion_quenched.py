#!/usr/bin/env python3
"""
Unit Tests for the quenched diffusion
Scale function, squared Bessel transitions, hitting-time draws and Xi samplers
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import math

import numpy as np
import pytest

from services import diffusion_quenched
from services.diffusion_quenched import (
    besq_transition, coupled_hitting_times, quenched_hitting_time, quenched_hitting_times, sample_besq_path,
    sample_xi, sample_xi_stopping, scale_A, shifted_environment, surrogate_log_sigma,
)
from services.environment import Environment, StepModel, build_environment
from services.mittag_leffler import LimitLawSpec
from services.stable_core import StableLaw
from utils import DomainError, RangeError, TruncatedI2, derive_stream


@pytest.fixture
def flat_environment():
    """Zero potential: the diffusion is a standard Brownian motion"""
    return build_environment(StepModel.balanced(), 1024, derive_stream(0))


# ========================================
# Scale function
# ========================================

def test_scale_function_on_a_step_potential():
    env = Environment([1.0], [0.0])
    test_cases = [
        (0.0, 0.0),
        (0.5, 0.5),
        (1.5, 1.0 + 0.5 * math.e),
        (2.0, 1.0 + math.e),
        (-1.0, -1.0),
        (-2.0, -2.0),
    ]
    for x, expected in test_cases:
        assert scale_A(env, x) == pytest.approx(expected), f"A({x})"
    with pytest.raises(RangeError, match="scale-function domain"):
        scale_A(env, 2.5)


# ========================================
# Squared Bessel processes
# ========================================

def test_besq_two_mean():
    """E BESQ2_t = x + 2t"""
    draws = besq_transition(2, np.ones(100_000), 0.5, derive_stream(31, 'besq2'))
    assert draws.mean() == pytest.approx(2.0, abs=0.03)
    assert np.all(draws >= 0)


def test_besq_zero_martingale_and_absorption():
    """BESQ0 is a martingale absorbed by time t with probability exp(-x / 2t)"""
    draws = besq_transition(0, np.ones(100_000), 0.5, derive_stream(31, 'besq0'))
    assert draws.mean() == pytest.approx(1.0, abs=0.03)
    assert (draws == 0.0).mean() == pytest.approx(math.exp(-1.0), abs=0.01)


def test_besq_zero_from_zero_stays_absorbed():
    path = sample_besq_path(0, 0.0, [0.0, 1.0, 2.0], derive_stream(1))
    assert path.values.tolist() == [0.0, 0.0, 0.0]
    assert path.absorbed


def test_besq_arguments():
    with pytest.raises(DomainError, match="dimensions 0 and 2"):
        besq_transition(1, np.ones(3), 1.0, derive_stream(1))
    with pytest.raises(DomainError, match="starting at 0"):
        sample_besq_path(2, 1.0, [1.0, 2.0], derive_stream(1))
    with pytest.raises(DomainError, match="strictly increasing"):
        sample_besq_path(2, 1.0, [0.0, 1.0, 1.0], derive_stream(1))
    with pytest.raises(DomainError, match="start must be"):
        sample_besq_path(2, -1.0, [0.0, 1.0], derive_stream(1))


# ========================================
# Quenched hitting times
# ========================================

def test_flat_potential_matches_brownian_hitting_time(flat_environment):
    """P(sigma(1) <= 1) = erfc(1 / sqrt 2) for a Brownian motion"""
    batch = quenched_hitting_times(flat_environment, 1.0, 1.0 / 16, 2000, derive_stream(32, 'flat'))
    below = (batch.log_sigma <= 0.0) & ~batch.truncated
    probability = below.mean()
    expected = math.erfc(1.0 / math.sqrt(2.0))
    se = math.sqrt(expected * (1.0 - expected) / 2000)
    assert abs(probability - expected) <= 4 * se + 0.02
    assert batch.n_truncated <= 40


def test_quenched_hitting_times_arguments(flat_environment):
    with pytest.raises(RangeError, match="forward span"):
        quenched_hitting_times(flat_environment, 2000.0, 0.5, 1, derive_stream(1))
    with pytest.raises(DomainError, match="mesh"):
        quenched_hitting_times(flat_environment, 1.0, 0.0, 1, derive_stream(1))
    with pytest.raises(RangeError, match="no negative side"):
        quenched_hitting_times(Environment([0.0], []), 1.0, 0.5, 1, derive_stream(1))


def test_unabsorbed_draw_raises_with_partial_value():
    """A high wall ahead freezes the backward clock, so the dimension-0 path cannot die"""
    env = Environment([50.0, 0.0], [0.0])
    with pytest.raises(TruncatedI2) as excinfo:
        quenched_hitting_time(env, 2.0, 0.25, derive_stream(33), backward_span=1)
    assert excinfo.value.partial > 0


def test_coupled_hitting_times_are_nondecreasing(flat_environment):
    log_sigma = coupled_hitting_times(flat_environment, [1, 2, 3], 1.0 / 8, derive_stream(34, 'coupled'),
                                      backward_span=None)
    assert log_sigma.shape == (3,)
    assert np.all(np.diff(log_sigma) >= 0)
    with pytest.raises(DomainError):
        coupled_hitting_times(flat_environment, [2, 1], 0.5, derive_stream(1))


def test_shifted_environment():
    env = Environment([1.0, 2.0, 3.0], [4.0])
    shifted = shifted_environment(env, 2)
    assert shifted.steps_pos.tolist() == [3.0]
    assert shifted.steps_neg.tolist() == [-2.0, -1.0, 4.0]


def test_surrogate_on_a_known_potential():
    """Forward potential 0, 1, -1 and backward potential 0, -1, 3"""
    env = Environment([1.0, -2.0, 3.0], [-1.0, 4.0])
    assert surrogate_log_sigma(env, 2.0) == 2.0
    assert surrogate_log_sigma(env, 3.0) == 3.0


# ========================================
# Xi samplers
# ========================================

def test_gaussian_xi_mean():
    """E Xi = 1/3 from the transform tanh(sqrt q) / sqrt q"""
    sample = sample_xi(StableLaw.gaussian(), 256, derive_stream(35, 'xi'), size=2000)
    assert sample.exceeded == 0
    assert sample.failure_rate == 0.0
    assert np.all(sample.values > 0)
    assert sample.values.mean() == pytest.approx(1.0 / 3.0, abs=0.05)


def test_gaussian_xi_by_stopping_mean():
    sample = sample_xi_stopping(LimitLawSpec(2.0, 'NoPositiveJumps'), 256, derive_stream(35, 'stop'), 2000)
    assert sample.values.size + sample.exceeded == 2000
    assert sample.values.mean() == pytest.approx(1.0 / 3.0, abs=0.05)


def test_single_xi_draw():
    assert sample_xi(StableLaw.one_sided(1.5, 'NoPositiveJumps'), 64, derive_stream(36)) > 0
    with pytest.raises(ValueError, match="mesh"):
        sample_xi(StableLaw.gaussian(), 1, derive_stream(1))


def test_degenerate_xi_draws_raise(monkeypatch):
    """A zero grid functional would give an infinite Xi"""
    monkeypatch.setattr(diffusion_quenched, '_forward_functionals',
                        lambda law, mesh, count, rng: (np.zeros(count), np.zeros(count)))
    monkeypatch.setattr(diffusion_quenched, '_backward_undershoot',
                        lambda law, top, mesh, rng, shift, cap_steps: np.zeros(top.size))
    with pytest.raises(DomainError, match="not positive and finite"):
        sample_xi(StableLaw.one_sided(1.5, 'NoPositiveJumps'), 64, derive_stream(37), size=4)


if __name__ == "__main__":
    pytest.main([__file__])
