"""
Closed-form experiments: Mittag-Leffler roots, transform identities, CDF inversion
and the liminf classifier table

No randomness is involved; every check compares two deterministic numbers.
"""

import logging
import math

import numpy as np

from services.mittag_leffler import (
    LimitLawSpec, invert_laplace_cdf, laplace_tau_sharp, laplace_tau_sharp_and_tau_b, laplace_xi,
    laplace_xi_quadrature, mittag_leffler, rho1, rho2,
)
from services.rwre import Classification, theorem2b_classifier, theorem_classifiers
from services.stable_core import Spectral
from utils.errors import InversionUnstable
from workflows.harness import ExperimentRun, experiment

logger = logging.getLogger(__name__)

ONE_SIDED = (Spectral.NO_POSITIVE_JUMPS.value, Spectral.NO_NEGATIVE_JUMPS.value)


def gaussian_xi_cdf(t: float, terms: int = 4000) -> float:
    """
    CDF of Xi at alpha = 2 from its eigen-expansion

    tanh(sqrt q) / sqrt q = sum_k 2 / (q + lam_k) with lam_k = ((k + 1/2) pi)^2,
    so F(t) = 1 - 2 sum_k exp(-lam_k t) / lam_k.
    """
    lam = ((np.arange(terms) + 0.5) * math.pi) ** 2
    return float(1.0 - 2.0 * math.fsum(np.exp(-lam * t) / lam))


# ========================================
# ksharp-roots
# ========================================

@experiment(
    'ksharp-roots',
    anchor="rho1 / rho2: first negative roots giving K^#; both equal pi^2/4 at alpha = 2",
    defaults={'alphas': [1.25, 1.5, 1.75, 2.0], 'residual_tol': 1e-8},
    budget='< 1 s',
)
def ksharp_roots(run: ExperimentRun) -> None:
    residual_tol = float(run.params['residual_tol'])
    for alpha in run.params['alphas']:
        alpha = float(alpha)
        r1, r2 = rho1(alpha), rho2(alpha)
        row1 = run.add_value('rho1', r1, alpha=alpha)
        row2 = run.add_value('rho2', r2, alpha=alpha)
        residual1 = abs(mittag_leffler(alpha, -r1))
        residual2 = abs(alpha * -r2 * mittag_leffler(alpha, -r2, 2) + (alpha - 1.0) * mittag_leffler(alpha, -r2, 1))
        run.check_bound('rho1 residual', residual1, residual_tol, row=row1, alpha=alpha)
        run.check_bound('rho2 residual', residual2, residual_tol, row=row2, alpha=alpha)
        if alpha == 2.0:
            run.check_close('rho1 = pi^2/4', r1, math.pi ** 2 / 4.0, 1e-10, row=row1, alpha=alpha)
            run.check_close('rho2 = pi^2/4', r2, math.pi ** 2 / 4.0, 1e-8, row=row2, alpha=alpha)


# ========================================
# transform-identities
# ========================================

@experiment(
    'transform-identities',
    anchor="tau^# ^ tau_1 transform equals the tau^# transform; Xi transforms agree at alpha = 2",
    defaults={'alphas': [1.25, 1.5, 1.75, 2.0], 'qs': [0.25, 0.5, 1.0, 2.0, 4.0]},
    budget='< 1 s',
)
def transform_identities(run: ExperimentRun) -> None:
    qs = [float(q) for q in run.params['qs']]
    for alpha in run.params['alphas']:
        alpha = float(alpha)
        for spectral in ONE_SIDED:
            spec = LimitLawSpec(alpha, spectral)
            for q in qs:
                point = {'alpha': alpha, 'spectral': spectral, 'q': q}
                sharp = laplace_tau_sharp(spec, q)
                run.add_value('laplace_tau_sharp', sharp, **point)
                stopped = laplace_tau_sharp_and_tau_b(spec, q, 1.0)
                run.check_close('tau^# ^ tau_1 = tau^#', stopped, sharp, 1e-10, **point)

                closed = laplace_xi(spec, q)
                row = run.add_value('laplace_xi', closed, **point)
                quadrature = laplace_xi_quadrature(spec, q)
                run.check_close('Xi transform by quadrature', quadrature, closed, 1e-7, row=row, **point)

        if alpha != 2.0:
            continue
        npj = LimitLawSpec(2.0, Spectral.NO_POSITIVE_JUMPS)
        nnj = LimitLawSpec(2.0, Spectral.NO_NEGATIVE_JUMPS)
        for q in qs:
            exact = math.tanh(math.sqrt(q)) / math.sqrt(q)
            run.check_close('Xi transforms agree at alpha=2', laplace_xi(npj, q), laplace_xi(nnj, q), 1e-8,
                            alpha=alpha, q=q)
            run.check_close('Xi transform = tanh(sqrt q)/sqrt q', laplace_xi(npj, q), exact, 1e-8, alpha=alpha, q=q)
            run.check_close('tau^# transform = 1/cosh(sqrt q)', laplace_tau_sharp(npj, q),
                            1.0 / math.cosh(math.sqrt(q)), 1e-10, alpha=alpha, q=q)


# ========================================
# xi-cdf-inversion
# ========================================

def _invert_pointwise(run: ExperimentRun, spec: LimitLawSpec, times, order: int):
    """CDF by Stehfest per time; unstable points come back as None"""
    values = []
    for t in times:
        try:
            values.append(invert_laplace_cdf(lambda s: laplace_xi(spec, s), [t], order)[0])
        except InversionUnstable as exc:
            run.warn('InversionUnstable', str(exc), alpha=spec.alpha, spectral=spec.spectral.value, t=t)
            values.append(None)
    return values


@experiment(
    'xi-cdf-inversion',
    anchor="Gaver-Stehfest CDF of Xi against the exact alpha = 2 eigen-series",
    defaults={'t_grid': [0.05, 0.1, 0.2, 0.5, 1.0, 2.0], 'order': 14, 'tolerance': 5e-3,
              'heavy_alpha': 1.5},
    budget='< 5 s',
)
def xi_cdf_inversion(run: ExperimentRun) -> None:
    times = [float(t) for t in run.params['t_grid']]
    order = int(run.params['order'])
    tolerance = float(run.params['tolerance'])

    gaussian = LimitLawSpec(2.0, Spectral.NO_POSITIVE_JUMPS)
    inverted = _invert_pointwise(run, gaussian, times, order)
    stable_points = 0
    for t, value in zip(times, inverted):
        exact = gaussian_xi_cdf(t)
        run.add_value('exact_cdf', exact, alpha=2.0, t=t)
        if value is None:
            run.check('Stehfest CDF vs eigen-series', None, f"abs < {tolerance:g}", None, exact, alpha=2.0, t=t)
            continue
        stable_points += 1
        row = run.add_value('stehfest_cdf', value, alpha=2.0, t=t)
        run.check_close('Stehfest CDF vs eigen-series', value, exact, tolerance, row=row, alpha=2.0, t=t)
    run.check_bound('stable inversion points', stable_points, len(times) / 2.0, upper=False, alpha=2.0)

    alpha = float(run.params['heavy_alpha'])
    for spectral in ONE_SIDED:
        spec = LimitLawSpec(alpha, spectral)
        values = _invert_pointwise(run, spec, times, order)
        for t, value in zip(times, values):
            if value is not None:
                run.add_value('stehfest_cdf', value, alpha=alpha, spectral=spectral, t=t)
        resolved = [v for v in values if v is not None]
        monotone = all(b >= a - tolerance for a, b in zip(resolved, resolved[1:]))
        run.check('CDF nondecreasing', monotone if resolved else None, f"steps >= -{tolerance:g}",
                  len(resolved), None, alpha=alpha, spectral=spectral)


# ========================================
# classifier-table
# ========================================

@experiment(
    'classifier-table',
    anchor="liminf classification: Zero iff beta < 1/q (critical: Infinite under normal attraction)",
    defaults={'betas': [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0], 'qs': [0.25, 0.5, 0.75]},
    budget='< 1 s',
)
def classifier_table(run: ExperimentRun) -> None:
    for q in run.params['qs']:
        for beta in run.params['betas']:
            verdict = theorem_classifiers(float(beta), float(q))
            run.add_value('one_sided', verdict.value, beta=float(beta), q=float(q))
    for beta in run.params['betas']:
        run.add_value('two_sided', theorem2b_classifier(float(beta)).value, beta=float(beta))

    cases = [
        ('beta < 1/q', theorem_classifiers(1.0, 0.5), Classification.ZERO, {'beta': 1.0, 'q': 0.5}),
        ('beta = 1/q', theorem_classifiers(2.0, 0.5), Classification.INFINITE, {'beta': 2.0, 'q': 0.5}),
        ('beta > 1/q', theorem_classifiers(3.0, 0.5), Classification.INFINITE, {'beta': 3.0, 'q': 0.5}),
        ('beta = 1/q without normal attraction', theorem_classifiers(2.0, 0.5, normal_attraction=False),
         Classification.UNDETERMINED, {'beta': 2.0, 'q': 0.5}),
        ('two-sided beta = 1/2', theorem2b_classifier(0.5), Classification.ZERO, {'beta': 0.5}),
        ('two-sided beta > 1/2', theorem2b_classifier(0.75), Classification.INFINITE, {'beta': 0.75}),
    ]
    for check, got, expected, point in cases:
        run.check(check, got == expected, 'exact', got.value, expected.value, **point)
