"""
Strictly stable laws: parameterization, sampling and norming functions

The laws are described by the characteristic function

    E exp(i lam S) = exp(-gamma |lam|^alpha (1 - i sign(lam) tan(pi alpha (p - 1/2))))

with positivity parameter p = P(S > 0). The sampler works in the standard
S1 parameterization (index alpha, skewness beta, scale sigma), related by

    beta * tan(pi alpha / 2) = tan(pi alpha (p - 1/2)),    sigma = gamma^(1/alpha)

which is exact for alpha != 1; alpha = 1 is supported only for p = 1/2
(symmetric Cauchy, beta = 0, sigma = gamma).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from config import GRID_MONITOR_BETA
from services.cadlag import CadlagGrid
from utils.errors import DomainError, InvalidLaw, UnsupportedParameterization
from utils.random_streams import RandomStream

logger = logging.getLogger(__name__)

_ONE_SIDED_TOL = 1e-12


class Spectral(str, Enum):
    TWO_SIDED_JUMPS = 'TwoSidedJumps'
    NO_POSITIVE_JUMPS = 'NoPositiveJumps'
    NO_NEGATIVE_JUMPS = 'NoNegativeJumps'
    GAUSSIAN = 'Gaussian'


@dataclass(frozen=True)
class StableLaw:
    """
    Strictly stable law (alpha, p, gamma, spectral)

    One-sided laws use the scale that makes the exponential moment exactly
    exp(lam^alpha): E exp(lam S) for no positive jumps, E exp(-lam S) for no
    negative jumps. Build them with `StableLaw.one_sided`.
    """
    alpha: float
    p: float
    gamma: float = 1.0
    spectral: Spectral = Spectral.TWO_SIDED_JUMPS

    def __post_init__(self):
        object.__setattr__(self, 'spectral', Spectral(self.spectral))
        alpha, p = self.alpha, self.p
        if not 0 < alpha <= 2:
            raise InvalidLaw(f"alpha must be in (0, 2], got {alpha}")
        if not 0 < p < 1:
            raise InvalidLaw(f"p must be in (0, 1), got {p}")
        if not self.gamma > 0:
            raise InvalidLaw(f"gamma must be > 0, got {self.gamma}")
        q = 1.0 - p
        if alpha == 2:
            if self.spectral != Spectral.GAUSSIAN or abs(p - 0.5) > _ONE_SIDED_TOL:
                raise InvalidLaw("alpha = 2 requires spectral=Gaussian and p = 1/2")
            return
        if self.spectral == Spectral.GAUSSIAN:
            raise InvalidLaw(f"spectral=Gaussian requires alpha = 2, got {alpha}")
        if alpha * p > 1 + _ONE_SIDED_TOL or alpha * q > 1 + _ONE_SIDED_TOL:
            raise InvalidLaw(f"need alpha*p <= 1 and alpha*q <= 1, got alpha={alpha}, p={p}")
        no_positive = alpha > 1 and abs(alpha * p - 1) <= _ONE_SIDED_TOL
        no_negative = alpha > 1 and abs(alpha * q - 1) <= _ONE_SIDED_TOL
        expected = (Spectral.NO_POSITIVE_JUMPS if no_positive
                    else Spectral.NO_NEGATIVE_JUMPS if no_negative
                    else Spectral.TWO_SIDED_JUMPS)
        if self.spectral != expected:
            raise InvalidLaw(f"alpha={alpha}, p={p} is {expected.value}, not {self.spectral.value}")

    # ----- constructors -------------------------------------------------

    @classmethod
    def gaussian(cls, gamma: float = 1.0) -> "StableLaw":
        """Brownian marginal: characteristic function exp(-gamma lam^2), variance 2 gamma"""
        return cls(2.0, 0.5, gamma, Spectral.GAUSSIAN)

    @classmethod
    def one_sided(cls, alpha: float, spectral: Union[Spectral, str]) -> "StableLaw":
        """
        Completely asymmetric law with unit exponential-moment normalization

        Examples:
            >>> StableLaw.one_sided(1.5, 'NoPositiveJumps').p
            0.6666666666666666
        """
        spectral = Spectral(spectral)
        if alpha == 2:
            return cls.gaussian()
        if not 1 < alpha < 2:
            raise InvalidLaw(f"one-sided laws need alpha in (1, 2], got {alpha}")
        if spectral == Spectral.NO_POSITIVE_JUMPS:
            p = 1.0 / alpha
        elif spectral == Spectral.NO_NEGATIVE_JUMPS:
            p = 1.0 - 1.0 / alpha
        else:
            raise InvalidLaw(f"{spectral.value} is not one-sided")
        return cls(alpha, p, -math.cos(math.pi * alpha / 2.0), spectral)

    # ----- derived parameters -------------------------------------------

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def is_one_sided(self) -> bool:
        return self.spectral in (Spectral.NO_POSITIVE_JUMPS, Spectral.NO_NEGATIVE_JUMPS, Spectral.GAUSSIAN)

    def s1_parameters(self) -> Tuple[float, float]:
        """(beta, sigma) of the S1 parameterization"""
        if self.alpha == 1:
            if abs(self.p - 0.5) > _ONE_SIDED_TOL:
                raise UnsupportedParameterization(
                    f"alpha = 1 is supported only for p = 1/2 (symmetric Cauchy), got p={self.p}")
            return 0.0, self.gamma
        sigma = self.gamma ** (1.0 / self.alpha)
        if self.alpha == 2:
            return 0.0, sigma
        if self.spectral == Spectral.NO_POSITIVE_JUMPS:
            return -1.0, sigma
        if self.spectral == Spectral.NO_NEGATIVE_JUMPS:
            return 1.0, sigma
        beta = math.tan(math.pi * self.alpha * (self.p - 0.5)) / math.tan(math.pi * self.alpha / 2.0)
        return float(np.clip(beta, -1.0, 1.0)), sigma

    def to_dict(self) -> dict:
        return {'alpha': self.alpha, 'p': self.p, 'gamma': self.gamma, 'spectral': self.spectral.value}

    @classmethod
    def from_dict(cls, data: dict) -> "StableLaw":
        return cls(float(data['alpha']), float(data['p']), float(data.get('gamma', 1.0)),
                   Spectral(data.get('spectral', Spectral.TWO_SIDED_JUMPS)))


def cf_stable(law: StableLaw, lam: float) -> complex:
    """
    Characteristic function of the law at lam

    Examples:
        >>> round(cf_stable(StableLaw.gaussian(), 1.0).real, 6)
        0.367879
    """
    if law.alpha == 1 and abs(law.p - 0.5) > _ONE_SIDED_TOL:
        raise UnsupportedParameterization(
            f"alpha = 1 with p = {law.p}: the tan form is singular, only p = 1/2 is supported")
    if lam == 0:
        return complex(1.0, 0.0)
    skew = 0.0 if law.alpha == 2 else math.tan(math.pi * law.alpha * (law.p - 0.5))
    exponent = -law.gamma * abs(lam) ** law.alpha * complex(1.0, -math.copysign(1.0, lam) * skew)
    return complex(np.exp(exponent))


def sample_stable(law: StableLaw, rng: RandomStream, size=None):
    """
    Chambers-Mallows-Stuck variates with characteristic function `cf_stable(law, .)`

    Args:
        law: stable law
        rng: numpy Generator (consumed deterministically)
        size: None for a scalar, otherwise an int or shape tuple

    Returns:
        float or ndarray
    """
    beta, sigma = law.s1_parameters()
    if law.alpha == 2:
        return rng.normal(0.0, math.sqrt(2.0) * sigma, size=size)

    alpha = law.alpha
    u = math.pi * (rng.random(size) - 0.5)
    w = rng.standard_exponential(size)
    if alpha == 1:
        return sigma * np.tan(u)

    theta = math.atan(beta * math.tan(math.pi * alpha / 2.0)) / alpha
    t1 = np.sin(alpha * (u + theta)) / (math.cos(alpha * theta) * np.cos(u)) ** (1.0 / alpha)
    t2 = (np.cos(alpha * theta + (alpha - 1.0) * u) / w) ** ((1.0 - alpha) / alpha)
    return sigma * t1 * t2


def stable_increments(law: StableLaw, dt: float, shape, rng: RandomStream) -> np.ndarray:
    """Increments of the stable process over steps of length dt"""
    return dt ** (1.0 / law.alpha) * np.asarray(sample_stable(law, rng, size=shape), dtype=float)


def grid_monitoring_shift(law: StableLaw, dt: float) -> float:
    """
    Mean gap between the continuous and the grid-sampled extremes of a step dt

    Nonzero only for the Gaussian law, where it is beta * sd * sqrt(dt) with
    sd^2 = 2 gamma the variance per unit time. Jump laws get 0 (no correction).
    """
    if law.alpha != 2:
        return 0.0
    return GRID_MONITOR_BETA * math.sqrt(2.0 * law.gamma * dt)


def sample_stable_path(law: StableLaw, horizon: float, n_steps: int, rng: RandomStream) -> CadlagGrid:
    """
    Forward grid path on [0, horizon] with iid stable increments

    The value at `horizon` has the law of S_horizon = horizon^(1/alpha) S_1.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    dt = horizon / n_steps
    steps = stable_increments(law, dt, n_steps, rng)
    return CadlagGrid.from_steps(steps, dt=dt)


# ========================================
# Norming functions
# ========================================

@dataclass(frozen=True)
class NormingFunctions:
    """
    Power-form norming functions (normal attraction)

    a(x) = x^(1/alpha) normalizes the walk; b(x) = x^(1/q) normalizes the
    first descending ladder epoch, so b_inv(a_inv(x)) = x^(alpha q) is the
    growth of the ladder-height renewal function.
    """
    alpha: float
    q: float

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if not 0 < self.q < 1:
            raise ValueError(f"q must be in (0, 1), got {self.q}")

    @classmethod
    def normal_attraction(cls, alpha: float, q: float) -> "NormingFunctions":
        return cls(alpha, q)

    def a(self, x: float) -> float:
        return x ** (1.0 / self.alpha)

    def a_inv(self, x: float) -> float:
        return x ** self.alpha

    def b(self, x: float) -> float:
        return x ** (1.0 / self.q)

    def b_inv(self, x: float) -> float:
        return x ** self.q

    def to_dict(self) -> dict:
        return {'form': 'normal_attraction', 'alpha': self.alpha, 'q': self.q}


_NORMING_NAMES = ('a', 'a_inv', 'b', 'b_inv')


def norming_eval(nf: NormingFunctions, which: str, x: float) -> float:
    """
    Evaluate one of a, a_inv, b, b_inv at x >= 1

    Examples:
        >>> norming_eval(NormingFunctions(2.0, 0.5), 'a_inv', 3.0)
        9.0
    """
    if which not in _NORMING_NAMES:
        raise ValueError(f"which must be one of {_NORMING_NAMES}, got {which!r}")
    if x < 1:
        raise DomainError(f"norming functions are defined from 1, got x={x}")
    return float(getattr(nf, which)(x))


def default_norming(law: Optional[StableLaw] = None, alpha: Optional[float] = None,
                    q: Optional[float] = None) -> NormingFunctions:
    """Normal-attraction norming for a law (or explicit alpha, q)"""
    if law is not None:
        alpha, q = law.alpha, law.q
    return NormingFunctions(alpha, q)
