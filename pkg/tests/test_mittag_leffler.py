#!/usr/bin/env python3
"""
Unit Tests for the Mittag-Leffler numerics
Series evaluation, roots, closed-form transforms, two-sided exit and Stehfest inversion
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import inspect
import math

import numpy as np
import pytest

from config import STEHFEST_STABILITY_TOL
from services.mittag_leffler import (
    LimitLawSpec, MLFQuery, exit_two_sided, invert_laplace_cdf, ksharp_asymmetric, laplace_tau_sharp,
    laplace_tau_sharp_and_tau_b, laplace_xi, laplace_xi_quadrature, mittag_leffler, mlf, rho1, rho2,
    sample_r1, scale_W, stehfest_coefficients,
)
from services.stable_core import StableLaw
from utils import DomainError, InvalidLaw, InversionUnstable, PrecisionError, derive_stream

NPJ = 'NoPositiveJumps'
NNJ = 'NoNegativeJumps'


# ========================================
# Series evaluation
# ========================================

@pytest.mark.parametrize("x", [0.5, 4.0, 25.0, 100.0])
def test_alpha_two_is_cosine_on_the_negative_axis(x):
    """E_2(-x) = cos(sqrt(x)), evaluated through heavy cancellation"""
    assert mittag_leffler(2.0, -x) == pytest.approx(math.cos(math.sqrt(x)), abs=1e-10)


def test_alpha_one_is_exponential():
    test_cases = [
        (0, 1.0, math.e),
        (1, 1.0, math.e),
        (2, -2.0, math.exp(-2.0)),
        (0, -10.0, math.exp(-10.0)),
    ]
    for order, x, expected in test_cases:
        assert mittag_leffler(1.0, x, order) == pytest.approx(expected, rel=1e-10, abs=1e-13)


def test_values_at_zero():
    assert mlf(MLFQuery(1.5, 0.0)) == 1.0
    assert mlf(MLFQuery(1.5, 0.0, 1)) == pytest.approx(1.0 / math.gamma(2.5))
    assert mlf(MLFQuery(1.5, 0.0, 2)) == pytest.approx(2.0 / math.gamma(4.0))


def test_query_validation():
    """Each case: (kwargs, message fragment)"""
    print("\n" + "=" * 80)
    print("🧪 TEST: MLFQuery validation")
    print("=" * 80)

    test_cases = [
        (dict(alpha=0.0, x=1.0), "alpha must be in"),
        (dict(alpha=1.5, x=1.0, deriv_order=3), "deriv_order"),
        (dict(alpha=1.5, x=1.0, precision=1e-20), "precision must be in"),
        (dict(alpha=1.5, x=math.inf), "x must be finite"),
    ]
    for kwargs, message in test_cases:
        with pytest.raises(DomainError, match=message):
            MLFQuery(**kwargs)
        print(f"   ✅ {message}")


def test_overflow_is_a_precision_error():
    with pytest.raises(PrecisionError):
        mittag_leffler(1.0, 1e6)


# ========================================
# Roots and K^#
# ========================================

def test_roots_at_alpha_two():
    """Both roots equal pi^2 / 4 in the Gaussian case"""
    assert rho1(2.0) == pytest.approx(math.pi ** 2 / 4, abs=1e-9)
    assert rho2(2.0) == pytest.approx(math.pi ** 2 / 4, abs=1e-9)


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_roots_solve_their_equations(alpha):
    r1 = rho1(alpha)
    r2 = rho2(alpha)
    assert mittag_leffler(alpha, -r1) == pytest.approx(0.0, abs=1e-8)
    residual = alpha * -r2 * mittag_leffler(alpha, -r2, 2) + (alpha - 1.0) * mittag_leffler(alpha, -r2, 1)
    assert residual == pytest.approx(0.0, abs=1e-8)
    assert ksharp_asymmetric(LimitLawSpec(alpha, NPJ)) == r1
    assert ksharp_asymmetric(LimitLawSpec(alpha, NNJ)) == r2


def test_roots_need_alpha_above_one():
    with pytest.raises(DomainError):
        rho1(1.0)
    with pytest.raises(DomainError):
        rho2(2.5)


def test_limit_law_spec():
    with pytest.raises(InvalidLaw):
        LimitLawSpec(1.0, NPJ)
    with pytest.raises(InvalidLaw):
        LimitLawSpec(1.5, 'TwoSidedJumps')
    assert LimitLawSpec.from_law(StableLaw.gaussian(), NNJ) == LimitLawSpec(2.0, NNJ)
    assert LimitLawSpec(1.5, NPJ).law() == StableLaw.one_sided(1.5, NPJ)


# ========================================
# Closed-form transforms
# ========================================

def test_gaussian_transform_values():
    spec = LimitLawSpec(2.0, NPJ)
    assert laplace_tau_sharp(spec, 1.0) == pytest.approx(1.0 / math.cosh(1.0), abs=1e-10)
    assert laplace_xi(spec, 1.0) == pytest.approx(math.tanh(1.0), abs=1e-10)
    assert laplace_xi(spec, 4.0) == pytest.approx(math.tanh(2.0) / 2.0, abs=1e-10)


@pytest.mark.parametrize("q", [0.3, 1.0, 5.0])
def test_gaussian_transforms_do_not_depend_on_the_side(q):
    npj, nnj = LimitLawSpec(2.0, NPJ), LimitLawSpec(2.0, NNJ)
    assert laplace_tau_sharp(nnj, q) == pytest.approx(laplace_tau_sharp(npj, q), abs=1e-9)
    assert laplace_xi(nnj, q) == pytest.approx(laplace_xi(npj, q), abs=1e-9)


@pytest.mark.parametrize("spectral", [NPJ, NNJ])
def test_tau_b_at_one_is_tau_sharp(spectral):
    spec = LimitLawSpec(1.5, spectral)
    assert laplace_tau_sharp_and_tau_b(spec, 0.8, 1.0) == pytest.approx(laplace_tau_sharp(spec, 0.8), abs=1e-10)


@pytest.mark.parametrize("spectral", [NPJ, NNJ])
def test_xi_quadrature_matches_closed_form(spectral):
    spec = LimitLawSpec(1.5, spectral)
    assert laplace_xi_quadrature(spec, 1.0) == pytest.approx(laplace_xi(spec, 1.0), abs=1e-7)


def test_transforms_at_zero_and_below_the_pole():
    spec = LimitLawSpec(2.0, NPJ)
    assert laplace_tau_sharp(spec, 0.0) == pytest.approx(1.0)
    assert laplace_xi(spec, -1.0) > 1.0
    with pytest.raises(DomainError, match="pole"):
        laplace_tau_sharp(spec, -3.0)
    with pytest.raises(DomainError):
        laplace_tau_sharp_and_tau_b(spec, 1.0, 0.0)


def test_r1_law():
    spec = LimitLawSpec(1.5, NPJ)
    draws = sample_r1(spec, derive_stream(21, 'r1'), size=10_000)
    assert np.all((draws >= 0) & (draws <= 1))
    assert draws.mean() == pytest.approx(1.0 / 3.0, abs=0.02)  # E u^2
    assert scale_W(2.0, 3.0) == pytest.approx(3.0)


# ========================================
# Two-sided exit
# ========================================

def test_exit_two_sided_example():
    result = exit_two_sided(2.0, 1.0, 0.5)
    assert result.p_exit_low == pytest.approx(0.443409, abs=1e-6)
    assert 0.0 <= result.p_survive <= 1.0


@pytest.mark.parametrize("b", [0.25, 0.7])
def test_exit_low_is_the_far_barrier_in_the_gaussian_case(b):
    """Brownian motion from 0 in (b - 1, b) reaches b - 1 first, before Exp(q), with probability sinh(b sqrt q) / sinh(sqrt q)"""
    q = 2.0
    expected = math.sinh(b * math.sqrt(q)) / math.sinh(math.sqrt(q))
    assert exit_two_sided(2.0, q, b).p_exit_low == pytest.approx(expected, rel=1e-10)


def test_exit_two_sided_at_the_upper_end():
    """Boundary values at b = 1"""
    result = exit_two_sided(1.5, 2.0, 1.0)
    assert result.p_exit_low == pytest.approx(1.0)
    assert result.p_survive == pytest.approx(0.0, abs=1e-12)


def test_printed_form_differs_only_away_from_unit_rate():
    at_one = (exit_two_sided(1.5, 1.0, 0.4), exit_two_sided(1.5, 1.0, 0.4, printed_form=True))
    assert at_one[0].p_survive == pytest.approx(at_one[1].p_survive, abs=1e-12)
    at_four = (exit_two_sided(1.5, 4.0, 0.4), exit_two_sided(1.5, 4.0, 0.4, printed_form=True))
    assert abs(at_four[0].p_survive - at_four[1].p_survive) > 1e-3


def test_fast_killing_means_survival():
    assert exit_two_sided(2.0, 1000.0, 0.5).p_survive == pytest.approx(1.0, abs=1e-3)


def test_exit_two_sided_domain():
    with pytest.raises(DomainError):
        exit_two_sided(1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        exit_two_sided(1.5, 1.0, 1.5)
    with pytest.raises(DomainError):
        exit_two_sided(1.5, -1.0, 0.5)


# ========================================
# Stehfest inversion
# ========================================

def test_stehfest_recovers_exponential_cdf():
    values = invert_laplace_cdf(lambda s: 1.0 / (1.0 + s), [0.5, 1.0, 2.0])
    for t, value in zip([0.5, 1.0, 2.0], values):
        assert value == pytest.approx(1.0 - math.exp(-t), abs=1e-5)


def test_stehfest_coefficients():
    assert stehfest_coefficients(2) == (2.0, -2.0)
    assert math.fsum(stehfest_coefficients(14)) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(DomainError):
        stehfest_coefficients(3)


def test_stehfest_arguments():
    with pytest.raises(DomainError, match="order must be even"):
        invert_laplace_cdf(lambda s: 1.0 / (1.0 + s), [1.0], order=20)
    with pytest.raises(DomainError, match="t_grid"):
        invert_laplace_cdf(lambda s: 1.0 / (1.0 + s), [0.0])


def test_stehfest_flags_instability():
    """A point mass has a discontinuous CDF, which the method cannot resolve"""
    with pytest.raises(InversionUnstable) as excinfo:
        invert_laplace_cdf(lambda s: math.exp(-s), [1.0], stability_tol=1e-6)
    assert excinfo.value.divergence > 1e-6


def test_stehfest_default_stability_tolerance():
    default = inspect.signature(invert_laplace_cdf).parameters['stability_tol'].default
    assert default == STEHFEST_STABILITY_TOL == 1e-3


if __name__ == "__main__":
    pytest.main([__file__])
