"""
Mittag-Leffler numerics for the completely asymmetric limit laws

    E_alpha(x) = sum_n x^n / Gamma(alpha n + 1)

Covers E_alpha and its first two derivatives, the roots rho1 / rho2 (and so
K^#), the closed-form Laplace transforms of tau^#, tau^# ^ tau_b, Xi and the
two-sided exit problem, the scale function, the r1 law, and Gaver-Stehfest
inversion of CDF transforms.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, List, NamedTuple, Optional, Sequence, Union

import mpmath as mp
import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from config import (
    MLF_DEFAULT_PRECISION, MLF_MIN_PRECISION, MLF_MAX_PRECISION, MLF_MAX_TERMS,
    MLF_CANCELLATION_LIMIT, MLF_MAX_DPS, ROOT_SCAN_STEP, ROOT_SCAN_WINDOW, ROOT_TOLERANCE,
    STEHFEST_DEFAULT_ORDER, STEHFEST_MAX_ORDER, STEHFEST_STABILITY_TOL,
)
from services.stable_core import Spectral, StableLaw
from utils.errors import DomainError, InvalidLaw, InversionUnstable, PrecisionError, RootNotFound
from utils.random_streams import RandomStream

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
_LOG_MAX = math.log(np.finfo(float).max)


# ========================================
# Query and limit-law types
# ========================================

@dataclass(frozen=True)
class MLFQuery:
    alpha: float
    x: float
    deriv_order: int = 0
    precision: float = MLF_DEFAULT_PRECISION

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise DomainError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.deriv_order not in (0, 1, 2):
            raise DomainError(f"deriv_order must be 0, 1 or 2, got {self.deriv_order}")
        if not MLF_MIN_PRECISION <= self.precision <= MLF_MAX_PRECISION:
            raise DomainError(
                f"precision must be in [{MLF_MIN_PRECISION}, {MLF_MAX_PRECISION}], got {self.precision}")
        if not math.isfinite(self.x):
            raise DomainError(f"x must be finite, got {self.x}")


@dataclass(frozen=True)
class LimitLawSpec:
    """Completely asymmetric stable limit (alpha > 1, one-sided jumps)"""
    alpha: float
    spectral: Spectral

    def __post_init__(self):
        object.__setattr__(self, 'spectral', Spectral(self.spectral))
        if not 1 < self.alpha <= 2:
            raise InvalidLaw(f"completely asymmetric limit laws need alpha in (1, 2], got {self.alpha}")
        if self.spectral not in (Spectral.NO_POSITIVE_JUMPS, Spectral.NO_NEGATIVE_JUMPS):
            raise InvalidLaw(f"spectral must be NoPositiveJumps or NoNegativeJumps, got {self.spectral.value}")

    @property
    def no_positive_jumps(self) -> bool:
        return self.spectral == Spectral.NO_POSITIVE_JUMPS

    @classmethod
    def from_law(cls, law: StableLaw, spectral: Union[Spectral, str, None] = None) -> "LimitLawSpec":
        """The Gaussian law is both one-sided kinds; `spectral` picks one (default NoPositiveJumps)"""
        if law.spectral == Spectral.GAUSSIAN:
            return cls(2.0, Spectral(spectral or Spectral.NO_POSITIVE_JUMPS))
        return cls(law.alpha, law.spectral)

    def law(self) -> StableLaw:
        return StableLaw.one_sided(self.alpha, self.spectral)

    def to_dict(self) -> dict:
        return {'alpha': self.alpha, 'spectral': self.spectral.value}


# ========================================
# Series evaluation
# ========================================

def _series_length(alpha: float, log_abs_x: float, k: int, log_floor: float) -> int:
    """Number of terms until the tail drops below exp(log_floor) and keeps decreasing"""
    n_max = 64
    while True:
        n = np.arange(k, n_max)
        log_mag = gammaln(n + 1) - gammaln(n - k + 1) - gammaln(alpha * n + 1) + (n - k) * log_abs_x
        if log_mag[-1] < log_floor and log_mag[-1] < log_mag[-2]:
            return n_max
        if n_max >= MLF_MAX_TERMS:
            raise PrecisionError(
                f"E_alpha series for alpha={alpha}, log|x|={log_abs_x:.3g} needs more than {MLF_MAX_TERMS} terms")
        n_max = min(2 * n_max, MLF_MAX_TERMS)


def _mlf_mp(alpha: float, x: float, k: int, n_max: int, dps: int) -> float:
    with mp.workdps(dps):
        a = mp.mpf(alpha)
        xm = mp.mpf(x)
        total = mp.fsum(mp.ff(n, k) * xm ** (n - k) * mp.rgamma(a * n + 1) for n in range(k, n_max))
        return float(total)


def mlf(query: MLFQuery) -> float:
    """
    E_alpha(x), E'_alpha(x) or E''_alpha(x) to within the query precision

    Sums the series in double precision with exact (fsum) accumulation when
    the per-term rounding bound is within target; otherwise, which happens
    for negative x where the alternating terms cancel, re-sums in mpmath at
    a working precision sized from the largest term.

    Raises:
        PrecisionError: required digits exceed the mpmath ceiling, the series
            needs too many terms, or the value overflows double precision

    Examples:
        >>> round(mlf(MLFQuery(1.0, 1.0)), 12)
        2.718281828459
        >>> mlf(MLFQuery(1.5, 0.0))
        1.0
    """
    alpha, x, k = query.alpha, float(query.x), query.deriv_order
    if x == 0.0:
        return float(math.factorial(k) / math.gamma(alpha * k + 1))

    log_abs_x = math.log(abs(x))
    log_floor = math.log(query.precision) - 7.0
    n_max = _series_length(alpha, log_abs_x, k, log_floor)
    n = np.arange(k, n_max)
    log_parts = (gammaln(n + 1), gammaln(n - k + 1), gammaln(alpha * n + 1), (n - k) * log_abs_x)
    log_mag = log_parts[0] - log_parts[1] - log_parts[2] + log_parts[3]
    if log_mag.max() > _LOG_MAX - 1:
        raise PrecisionError(f"E_alpha^({k})({x}) overflows double precision at alpha={alpha}", math.inf)

    magnitudes = np.exp(log_mag)
    signs = np.where((x < 0) & ((n - k) % 2 == 1), -1.0, 1.0)
    value = math.fsum(signs * magnitudes)
    rounding = sum(np.abs(part) for part in log_parts) + 4.0
    error_bound = float(np.sum(magnitudes * rounding) * EPS)
    target = query.precision * max(1.0, abs(value))
    largest = float(magnitudes.max())

    cancellation = largest / abs(value) if value != 0.0 else math.inf
    if x > 0 or (error_bound <= target and cancellation <= MLF_CANCELLATION_LIMIT):
        return value

    dps = int(math.ceil(math.log10(largest / query.precision))) + 12
    dps = max(dps, 20)
    if dps > MLF_MAX_DPS:
        raise PrecisionError(
            f"E_alpha^({k})({x}) at alpha={alpha} needs {dps} digits (ceiling {MLF_MAX_DPS})", error_bound)
    logger.debug(f"mlf: extended precision ({dps} digits) at alpha={alpha}, x={x}, order={k}")
    return _mlf_mp(alpha, x, k, n_max, dps)


def mittag_leffler(alpha: float, x: float, deriv_order: int = 0,
                   precision: float = MLF_DEFAULT_PRECISION) -> float:
    """Shorthand for mlf(MLFQuery(...))"""
    return mlf(MLFQuery(alpha, x, deriv_order, precision))


# ========================================
# Roots and K^#
# ========================================

def _first_negative_root(func: Callable[[float], float], label: str, alpha: float) -> float:
    """Scan [-window, 0] leftwards from 0, then bisect the first sign change"""
    previous_x, previous = 0.0, func(0.0)
    n_steps = int(round(ROOT_SCAN_WINDOW / ROOT_SCAN_STEP))
    for i in range(1, n_steps + 1):
        x = -i * ROOT_SCAN_STEP
        current = func(x)
        if current == 0.0:
            return -x
        if math.copysign(1.0, current) != math.copysign(1.0, previous):
            root = optimize.bisect(func, x, previous_x, xtol=ROOT_TOLERANCE, maxiter=200)
            return -float(root)
        previous_x, previous = x, current
    raise RootNotFound(f"{label}: no sign change in [-{ROOT_SCAN_WINDOW}, 0] at alpha={alpha}")


def _rho2_equation(alpha: float, x: float) -> float:
    """alpha x E''(x) + (alpha - 1) E'(x)"""
    return alpha * x * mittag_leffler(alpha, x, 2) + (alpha - 1.0) * mittag_leffler(alpha, x, 1)


@lru_cache(maxsize=64)
def rho1(alpha: float) -> float:
    """
    rho > 0 with E_alpha(-rho) = 0 and no root of E_alpha in (-rho, 0]

    Examples:
        >>> abs(rho1(2.0) - math.pi ** 2 / 4) < 1e-10
        True
    """
    if not 1 < alpha <= 2:
        raise DomainError(f"rho1 needs alpha in (1, 2], got {alpha}")
    return _first_negative_root(lambda x: mittag_leffler(alpha, x), 'rho1', alpha)


@lru_cache(maxsize=64)
def rho2(alpha: float) -> float:
    """First negative root of alpha x E''_alpha + (alpha - 1) E'_alpha, as a positive number"""
    if not 1 < alpha <= 2:
        raise DomainError(f"rho2 needs alpha in (1, 2], got {alpha}")
    return _first_negative_root(lambda x: _rho2_equation(alpha, x), 'rho2', alpha)


def ksharp_asymmetric(spec: LimitLawSpec) -> float:
    """Decay rate K^#: rho1 without positive jumps, rho2 without negative jumps"""
    return rho1(spec.alpha) if spec.no_positive_jumps else rho2(spec.alpha)


def _check_below_pole(spec: LimitLawSpec, q: float) -> None:
    if q >= 0:
        return
    pole = ksharp_asymmetric(spec)
    if q <= -pole:
        raise DomainError(f"q={q} is at or beyond the transform pole -{pole:.12g} ({spec.spectral.value})")


# ========================================
# Closed-form transforms
# ========================================

def _derivatives(alpha: float, q: float):
    return mittag_leffler(alpha, q), mittag_leffler(alpha, q, 1), mittag_leffler(alpha, q, 2)


def laplace_tau_sharp(spec: LimitLawSpec, q: float) -> float:
    """
    E exp(-q tau^#_1)

    Examples:
        >>> spec = LimitLawSpec(2.0, 'NoPositiveJumps')
        >>> round(laplace_tau_sharp(spec, 1.0), 10)
        0.6480542737
    """
    _check_below_pole(spec, q)
    alpha = spec.alpha
    e0, e1, e2 = _derivatives(alpha, q)
    if spec.no_positive_jumps:
        return 1.0 / e0
    return e0 - alpha * q * e1 ** 2 / (alpha * q * e2 + (alpha - 1.0) * e1)


def laplace_tau_sharp_and_tau_b(spec: LimitLawSpec, q: float, b: float) -> float:
    """E exp(-q (tau^#_1 ^ tau_b)) for 0 < b <= 1"""
    if not 0 < b <= 1:
        raise DomainError(f"b must be in (0, 1], got {b}")
    _check_below_pole(spec, q)
    alpha = spec.alpha
    if spec.no_positive_jumps:
        return mittag_leffler(alpha, q * (1.0 - b) ** alpha) / mittag_leffler(alpha, q)
    _, e1, e2 = _derivatives(alpha, q)
    qb = q * b ** alpha
    return (mittag_leffler(alpha, qb)
            - b ** (alpha - 1.0) * alpha * q * mittag_leffler(alpha, qb, 1) * e1
            / (alpha * q * e2 + (alpha - 1.0) * e1))


def laplace_xi(spec: LimitLawSpec, q: float) -> float:
    """
    E exp(-q Xi) for the limit of the normalized supremum

    Examples:
        >>> round(laplace_xi(LimitLawSpec(2.0, 'NoPositiveJumps'), 1.0), 10)
        0.761594156
    """
    _check_below_pole(spec, q)
    alpha = spec.alpha
    e0, e1, e2 = _derivatives(alpha, q)
    if spec.no_positive_jumps:
        return math.gamma(alpha + 1.0) * e1 / e0
    return (alpha - 1.0) * e1 / (alpha * q * e2 + (alpha - 1.0) * e1)


def r1_density(spec: LimitLawSpec, x: float) -> float:
    """Density of r1 on (0, 1)"""
    if not 0 < x < 1:
        return 0.0
    y = x if spec.no_positive_jumps else 1.0 - x
    return (spec.alpha - 1.0) * y ** (spec.alpha - 2.0)


def laplace_xi_quadrature(spec: LimitLawSpec, q: float) -> float:
    """
    E exp(-q Xi) by integrating the tau^# ^ tau_b transform against the r1 law

    Xi has the law of tau^#_1 ^ tau_{r1} with r1 independent of the path.
    The endpoint singularity of the r1 density goes into quad's algebraic weight.
    """
    alpha = spec.alpha
    wvar = (alpha - 2.0, 0.0) if spec.no_positive_jumps else (0.0, alpha - 2.0)

    def integrand(b):
        if b <= 0.0:
            return 1.0  # tau_0 = 0
        return laplace_tau_sharp_and_tau_b(spec, q, min(b, 1.0))

    value, abserr = integrate.quad(integrand, 0.0, 1.0, weight='alg', wvar=wvar, epsabs=1e-12, epsrel=1e-10)
    logger.debug(f"laplace_xi_quadrature: q={q}, value={value}, abserr={abserr:.2e}")
    return (alpha - 1.0) * value


class ExitProbabilities(NamedTuple):
    p_survive: float
    p_exit_low: float


def exit_two_sided(alpha: float, q: float, b: float, printed_form: bool = False) -> ExitProbabilities:
    """
    Two-sided exit of the process with no negative jumps before an exponential clock

    S has no negative jumps, starts at 0 and lives in (b - 1, b); it creeps
    downward, so it leaves through b - 1 continuously. Its dual b - S is
    spectrally negative, starts at b and leaves (0, 1) upward through 1 in
    the same event. With eta(q) an independent exponential time and tau* the
    exit time:

        p_exit_low = P(tau* <= eta, S exits below b - 1)
                   = b^(alpha-1) E'(q b^alpha) / E'(q)
        p_survive  = P(tau* > eta)
                   = 1 - E(q b^alpha) + p_exit_low (E(q) - 1)

    `printed_form=True` returns p_survive with E(b^alpha) in place of
    E(q b^alpha); the two agree at q = 1 only.

    Examples:
        >>> round(exit_two_sided(2.0, 1.0, 0.5).p_exit_low, 6)
        0.443409
    """
    if not 1 < alpha <= 2:
        raise DomainError(f"exit_two_sided needs alpha in (1, 2], got {alpha}")
    if not 0 < b <= 1:
        raise DomainError(f"b must be in (0, 1], got {b}")
    if q < 0:
        raise DomainError(f"q must be >= 0, got {q}")
    qb = q * b ** alpha
    p_exit_low = b ** (alpha - 1.0) * mittag_leffler(alpha, qb, 1) / mittag_leffler(alpha, q, 1)
    survive_arg = b ** alpha if printed_form else qb
    p_survive = 1.0 - mittag_leffler(alpha, survive_arg) + p_exit_low * (mittag_leffler(alpha, q) - 1.0)
    return ExitProbabilities(p_survive, p_exit_low)


def scale_W(alpha: float, x: float) -> float:
    """Scale function x^(alpha-1) / Gamma(alpha) of the spectrally one-sided stable process"""
    if not 1 < alpha <= 2:
        raise DomainError(f"scale_W needs alpha in (1, 2], got {alpha}")
    if x < 0:
        raise DomainError(f"scale_W is defined for x >= 0, got {x}")
    return x ** (alpha - 1.0) / math.gamma(alpha)


def sample_r1(spec: LimitLawSpec, rng: RandomStream, size=None):
    """Inverse-CDF draws of r1 (u^(1/(alpha-1)), mirrored without negative jumps)"""
    u = rng.random(size)
    draws = u ** (1.0 / (spec.alpha - 1.0))
    return draws if spec.no_positive_jumps else 1.0 - draws


# ========================================
# Gaver-Stehfest inversion
# ========================================

@lru_cache(maxsize=None)
def stehfest_coefficients(order: int) -> tuple:
    """Salzer weights V_1..V_N, computed exactly then rounded"""
    if order < 2 or order % 2:
        raise DomainError(f"Stehfest order must be even and >= 2, got {order}")
    half = order // 2
    weights = []
    for k in range(1, order + 1):
        total = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            total += Fraction(
                j ** half * math.factorial(2 * j),
                math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k))
        weights.append(float((-1) ** (k + half) * total))
    return tuple(weights)


def _stehfest(image: Callable[[float], float], t: float, order: int) -> float:
    ln2_t = math.log(2.0) / t
    return ln2_t * math.fsum(v * image(k * ln2_t)
                             for k, v in enumerate(stehfest_coefficients(order), start=1))


def invert_laplace_cdf(transform: Callable[[float], float], t_grid: Sequence[float],
                       order: int = STEHFEST_DEFAULT_ORDER,
                       stability_tol: float = STEHFEST_STABILITY_TOL) -> List[float]:
    """
    CDF values F(t) of a law on [0, inf) from its Laplace transform q -> E exp(-q X)

    Inverts transform(s) / s by Gaver-Stehfest at `order` and `order - 2`; the
    larger disagreement over the grid is the stability diagnostic.

    Args:
        transform: Laplace transform of the law
        t_grid: evaluation times (> 0)
        order: even Stehfest order, at most 18 in double precision
        stability_tol: largest tolerated |F_N - F_(N-2)|

    Returns:
        CDF values clamped to [0, 1]

    Raises:
        InversionUnstable: consecutive orders disagree beyond stability_tol

    Examples:
        >>> round(invert_laplace_cdf(lambda s: 1.0 / (1.0 + s), [1.0])[0], 5)
        0.63212
    """
    if order < 4 or order % 2 or order > STEHFEST_MAX_ORDER:
        raise DomainError(f"order must be even in [4, {STEHFEST_MAX_ORDER}], got {order}")
    times = [float(t) for t in t_grid]
    if any(not t > 0 for t in times):
        raise DomainError("t_grid values must be > 0")

    def image(s: float) -> float:
        return transform(s) / s

    values, divergence = [], 0.0
    for t in times:
        fine = _stehfest(image, t, order)
        coarse = _stehfest(image, t, order - 2)
        divergence = max(divergence, abs(fine - coarse))
        values.append(min(max(fine, 0.0), 1.0))
    if divergence > stability_tol:
        raise InversionUnstable(
            f"Stehfest orders {order} and {order - 2} differ by {divergence:.3e} (> {stability_tol})", divergence)
    return values
