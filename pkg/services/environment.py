"""
Random potentials and the random-walk environments they encode

The potential V is flat on every unit interval, right-continuous on
[0, inf), left-continuous on (-inf, 0] and identically 0 on (-1, 1):

    V(x) = V_floor(x)      for x >= 0
    V(x) = V_-floor(-x)    for x <= 0

with V_0 = 0, V_{n+1} - V_n = steps_pos[n] and V_{-n-1} - V_{-n} = steps_neg[n].
The walk in environment omega jumps right from site n with probability
omega_n = 1 / (1 + exp(V_{n+1} - V_n)).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit

from services.cadlag import CadlagGrid
from services.stable_core import (
    NormingFunctions,
    StableLaw,
    default_norming,
    sample_stable,
)
from utils.errors import DomainError, InvalidLaw, RangeError, UnsupportedParameterization
from utils.random_streams import RandomStream

logger = logging.getLogger(__name__)


class StepKind(str, Enum):
    EXACT_STABLE = 'ExactStable'
    PARETO_TAIL = 'ParetoTail'
    SINAI_TWO_POINT = 'SinaiTwoPoint'


@dataclass(frozen=True)
class StepModel:
    """
    Law of one potential increment, with its norming functions

    Use the constructors: `exact_stable`, `pareto_tail`, `sinai_two_point`,
    `sinai_symmetric`, `simple_random_walk`.
    """
    kind: StepKind
    alpha: float
    p: float
    law: Optional[StableLaw] = None
    tail_scale: float = 1.0
    log_odds: Tuple[float, ...] = ()
    weights: Tuple[float, ...] = ()
    nf: Optional[NormingFunctions] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', StepKind(self.kind))
        if self.nf is None:
            object.__setattr__(self, 'nf', default_norming(alpha=self.alpha, q=1.0 - self.p))

    # ----- constructors -------------------------------------------------

    @classmethod
    def exact_stable(cls, law: StableLaw) -> "StepModel":
        return cls(StepKind.EXACT_STABLE, law.alpha, law.p, law=law)

    @classmethod
    def pareto_tail(cls, alpha: float, p: float, tail_scale: float = 1.0) -> "StepModel":
        """
        Two-sided Pareto mixture in the domain of normal attraction of the (alpha, p) law

        The sign is positive with probability w+ = (1 + beta) / 2, where beta
        is the skewness matching p; magnitudes are Pareto with minimum
        `tail_scale`. For alpha > 1 the steps are centred.
        """
        if not 0 < alpha < 2:
            raise InvalidLaw(f"ParetoTail needs alpha in (0, 2), got {alpha}")
        if alpha == 1 and abs(p - 0.5) > 1e-12:
            raise UnsupportedParameterization("ParetoTail with alpha = 1 must be symmetric (p = 1/2)")
        if not tail_scale > 0:
            raise ValueError(f"tail_scale must be > 0, got {tail_scale}")
        StableLaw(alpha, p, 1.0, _spectral_for(alpha, p))
        return cls(StepKind.PARETO_TAIL, alpha, p, tail_scale=tail_scale)

    @classmethod
    def sinai_two_point(cls, log_odds: Sequence[float], weights: Optional[Sequence[float]] = None,
                        omega_bound: float = 1e-6) -> "StepModel":
        """
        Finite environment law given by its log-odds values log((1 - omega) / omega)

        The increments are centred and square-integrable, so the model sits in
        the Gaussian (alpha = 2) domain.
        """
        values = tuple(float(v) for v in log_odds)
        if not values:
            raise ValueError("log_odds must contain at least one value")
        if weights is None:
            weights = [1.0 / len(values)] * len(values)
        probs = tuple(float(w) for w in weights)
        if len(probs) != len(values) or any(w < 0 for w in probs) or abs(sum(probs) - 1) > 1e-12:
            raise ValueError(f"weights must be a probability vector matching log_odds, got {weights}")
        omegas = expit(-np.asarray(values))
        if np.any(omegas < omega_bound) or np.any(omegas > 1 - omega_bound):
            raise DomainError(f"omega values must stay inside ({omega_bound}, {1 - omega_bound})")
        mean = math.fsum(v * w for v, w in zip(values, probs))
        if abs(mean) > 1e-12:
            raise ValueError(f"log-odds must be centred (recurrent regime), mean is {mean}")
        return cls(StepKind.SINAI_TWO_POINT, 2.0, 0.5, log_odds=values, weights=probs)

    @classmethod
    def sinai_symmetric(cls, log_odds_variance: float = 2.0) -> "StepModel":
        """omega in {w, 1 - w} with equal weights and log-odds variance as given"""
        c = math.sqrt(log_odds_variance)
        return cls.sinai_two_point((c, -c))

    @classmethod
    def simple_random_walk(cls) -> "StepModel":
        """Potential steps +-1 with probability 1/2"""
        return cls.sinai_two_point((1.0, -1.0))

    @classmethod
    def balanced(cls) -> "StepModel":
        """omega identically 1/2: zero potential"""
        return cls.sinai_two_point((0.0,))

    # ----- derived ------------------------------------------------------

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def skewness(self) -> float:
        if self.alpha == 1 or self.alpha == 2:
            return 0.0
        beta = math.tan(math.pi * self.alpha * (self.p - 0.5)) / math.tan(math.pi * self.alpha / 2.0)
        return float(np.clip(beta, -1.0, 1.0))

    def tail_constants(self) -> Tuple[float, float]:
        """
        (c+, c-) with P(X > x) ~ c+ x^-alpha and P(X < -x) ~ c- x^-alpha (ParetoTail only)

        Examples:
            >>> StepModel.pareto_tail(1.5, 0.5, 2.0).tail_constants()
            (1.4142135623730951, 1.4142135623730951)
        """
        if self.kind != StepKind.PARETO_TAIL:
            raise ValueError(f"tail constants are explicit only for ParetoTail, not {self.kind.value}")
        w_plus = (1.0 + self.skewness) / 2.0
        scale = self.tail_scale ** self.alpha
        return w_plus * scale, (1.0 - w_plus) * scale

    def to_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind.value, 'alpha': self.alpha, 'p': self.p, 'nf': self.nf.to_dict()}
        if self.kind == StepKind.EXACT_STABLE:
            data['law'] = self.law.to_dict()
        elif self.kind == StepKind.PARETO_TAIL:
            data['tail_scale'] = self.tail_scale
        else:
            data['log_odds'] = list(self.log_odds)
            data['weights'] = list(self.weights)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StepModel":
        kind = StepKind(data['kind'])
        if kind == StepKind.EXACT_STABLE:
            return cls.exact_stable(StableLaw.from_dict(data['law']))
        if kind == StepKind.PARETO_TAIL:
            return cls.pareto_tail(float(data['alpha']), float(data['p']), float(data.get('tail_scale', 1.0)))
        return cls.sinai_two_point(data['log_odds'], data.get('weights'))


def _spectral_for(alpha: float, p: float) -> str:
    if alpha > 1 and abs(alpha * p - 1) <= 1e-12:
        return 'NoPositiveJumps'
    if alpha > 1 and abs(alpha * (1 - p) - 1) <= 1e-12:
        return 'NoNegativeJumps'
    return 'TwoSidedJumps'


def draw_steps(model: StepModel, shape, rng: RandomStream) -> np.ndarray:
    """Iid increments of the model"""
    if model.kind == StepKind.EXACT_STABLE:
        return np.asarray(sample_stable(model.law, rng, size=shape), dtype=float)

    if model.kind == StepKind.PARETO_TAIL:
        w_plus = (1.0 + model.skewness) / 2.0
        signs = np.where(rng.random(shape) < w_plus, 1.0, -1.0)
        magnitudes = model.tail_scale * (1.0 - rng.random(shape)) ** (-1.0 / model.alpha)
        steps = signs * magnitudes
        if model.alpha > 1:
            steps -= (2.0 * w_plus - 1.0) * model.tail_scale * model.alpha / (model.alpha - 1.0)
        return steps

    values = np.asarray(model.log_odds)
    if values.size == 1:
        return np.full(shape, values[0])
    return values[rng.choice(values.size, size=shape, p=np.asarray(model.weights))]


# ========================================
# Environment
# ========================================

def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Environment:
    """
    Two-sided potential materialized on [-len(steps_neg), len(steps_pos)]

    `model_neg` is set for environments whose negative side follows its own
    step law (independent sides sharing the norming sequence).
    """
    steps_pos: np.ndarray
    steps_neg: np.ndarray
    model: Optional[StepModel] = None
    model_neg: Optional[StepModel] = None
    seed: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'steps_pos', _frozen(self.steps_pos))
        object.__setattr__(self, 'steps_neg', _frozen(self.steps_neg))
        if self.steps_pos.ndim != 1 or self.steps_neg.ndim != 1:
            raise ValueError("steps must be 1-d sequences")

    @property
    def half_length(self) -> int:
        return min(self.steps_pos.size, self.steps_neg.size)

    @property
    def span(self) -> Tuple[int, int]:
        return -self.steps_neg.size, self.steps_pos.size

    @cached_property
    def potential_pos(self) -> np.ndarray:
        """V_0, V_1, ..., V_R"""
        return _frozen(np.concatenate([[0.0], np.cumsum(self.steps_pos)]))

    @cached_property
    def potential_neg(self) -> np.ndarray:
        """V_0, V_-1, ..., V_-L"""
        return _frozen(np.concatenate([[0.0], np.cumsum(self.steps_neg)]))

    def to_grid(self) -> CadlagGrid:
        """The integer skeleton of V as a two-sided path"""
        return CadlagGrid.from_values(self.potential_pos, self.potential_neg)

    def to_json(self) -> Dict[str, Any]:
        return {
            'model': self.model.to_dict() if self.model else None,
            'model_neg': self.model_neg.to_dict() if self.model_neg else None,
            'seed': self.seed,
            'steps_pos': self.steps_pos.tolist(),
            'steps_neg': self.steps_neg.tolist(),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "Environment":
        model = StepModel.from_dict(data['model']) if data.get('model') else None
        model_neg = StepModel.from_dict(data['model_neg']) if data.get('model_neg') else None
        return cls(np.asarray(data['steps_pos'], dtype=float), np.asarray(data['steps_neg'], dtype=float),
                   model, model_neg, data.get('seed'))


def build_environment(model: StepModel, half_length: int, rng: RandomStream,
                      model_neg: Optional[StepModel] = None, seed: Optional[int] = None) -> Environment:
    """
    Draw 2 * half_length iid steps

    The negative side stores V_{-n-1} - V_{-n}, i.e. minus an increment of
    the walk n -> -V_{-n}; with `model_neg` that walk follows its own law.
    """
    if half_length < 1:
        raise ValueError(f"half_length must be >= 1, got {half_length}")
    if model_neg is not None and model_neg.alpha != model.alpha:
        raise ValueError(f"both sides must share the norming index, got alpha {model.alpha} and {model_neg.alpha}")
    steps_pos = draw_steps(model, half_length, rng)
    steps_neg = -draw_steps(model_neg or model, half_length, rng)
    return Environment(steps_pos, steps_neg, model, model_neg, seed)


def potential_at(env: Environment, x: float) -> float:
    """
    V(x) with the one-sided continuity conventions

    Examples:
        >>> env = Environment([2.0, -1.0], [0.0, 0.0])
        >>> potential_at(env, 1.5), potential_at(env, 2.0), potential_at(env, -0.5)
        (2.0, 1.0, 0.0)
    """
    lo, hi = env.span
    if not lo <= x <= hi:
        raise RangeError(f"x={x} outside environment span [{lo}, {hi}]")
    if x >= 0:
        return float(env.potential_pos[int(math.floor(x))])
    return float(env.potential_neg[int(math.floor(-x))])


def env_to_omega(env: Environment) -> np.ndarray:
    """
    Transition probabilities omega_n for sites n = -L, ..., R-1, in site order

    Index i of the result is site i - L, where L = len(env.steps_neg).
    """
    omega_pos = expit(-env.steps_pos)
    omega_neg = expit(env.steps_neg)[::-1]
    return np.concatenate([omega_neg, omega_pos])


def omega_to_env(omega: Sequence[float], n_negative_sites: Optional[int] = None,
                 model: Optional[StepModel] = None) -> Environment:
    """
    Inverse of `env_to_omega`

    Args:
        omega: probabilities in site order starting at site -n_negative_sites
        n_negative_sites: defaults to half the length
        model: provenance only
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega >= 1):
        raise DomainError("omega values must lie in (0, 1)")
    if n_negative_sites is None:
        if omega.size % 2:
            raise ValueError("odd-length omega needs an explicit n_negative_sites")
        n_negative_sites = omega.size // 2
    steps_neg = logit(omega[:n_negative_sites][::-1])
    steps_pos = -logit(omega[n_negative_sites:])
    return Environment(steps_pos, steps_neg, model)
