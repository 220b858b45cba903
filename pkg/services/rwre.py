"""
Sinai walk: nearest-neighbour random walk in the random environment omega

P(Z_k+1 = Z_k + 1) = omega_{Z_k}, with omega_x = 1 / (1 + e^{V_x+1 - V_x})
so that log((1 - omega_x) / omega_x) are the potential's increments.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from scipy.stats import binom

from config import MC_CELL_BUDGET, RWRE_BATCH_SIZE, RWRE_MAX_SPAN_DOUBLINGS, RWRE_SPAN_FACTOR
from services.environment import Environment, StepModel, draw_steps, env_to_omega
from utils.errors import DomainError, RangeError
from utils.random_streams import RandomStream, stream_seed

logger = logging.getLogger(__name__)


class WalkStats(NamedTuple):
    n: int
    final: int
    max: int
    min: int
    max_abs: int


# ========================================
# Quenched walks
# ========================================

def rwre_path(env: Environment, n: int, rng: RandomStream) -> np.ndarray:
    """
    Positions Z_0..Z_n of one walk in a fixed environment

    Step k moves right iff the k-th uniform of the stream is below omega at
    the current site.

    Raises:
        RangeError: the walk needs omega at a site outside the environment
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    omega = env_to_omega(env)
    offset = env.steps_neg.size
    uniforms = rng.random(n)
    path = np.zeros(n + 1, dtype=np.int64)
    z = 0
    for k in range(n):
        site = z + offset
        if not 0 <= site < omega.size:
            raise RangeError(f"walk reached site {z} at step {k}, outside environment span {env.span}")
        z += 1 if uniforms[k] < omega[site] else -1
        path[k + 1] = z
    return path


def rwre_trajectory(env: Environment, n: int, rng: RandomStream) -> WalkStats:
    """
    Final position and extremes of one walk of n steps

    Examples:
        >>> import numpy as np
        >>> env = Environment(np.zeros(4), np.zeros(4))
        >>> rwre_trajectory(env, 0, np.random.default_rng(0))
        WalkStats(n=0, final=0, max=0, min=0, max_abs=0)
    """
    path = rwre_path(env, n, rng)
    top, bottom = int(path.max()), int(path.min())
    return WalkStats(n, int(path[-1]), top, bottom, max(top, -bottom))


def transition_counts(env: Environment, n: int, rng: RandomStream) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (sites, visits, right steps) over the first n steps of one walk

    Sites are listed in increasing order; visits count departures from a site.
    """
    path = rwre_path(env, n, rng)
    departures = path[:-1]
    right = np.diff(path) > 0
    sites, inverse, visits = np.unique(departures, return_inverse=True, return_counts=True)
    right_steps = np.bincount(inverse, weights=right, minlength=sites.size).astype(np.int64)
    return sites, visits, right_steps


# ========================================
# Annealed ensembles
# ========================================

def default_span(n: int) -> int:
    """Initial half-width RWRE_SPAN_FACTOR * sqrt(n log n)"""
    return max(8, int(math.ceil(RWRE_SPAN_FACTOR * math.sqrt(n * math.log(max(n, 2))))))


class _BatchEnvironment:
    """
    Per-walk environments on [-span, span) grown in doubling blocks

    Block r is drawn from its own stream, so each walk sees the same omega on
    a site whichever span it ends up needing.
    """

    def __init__(self, model: StepModel, n_walks: int, span: int, streams: List[RandomStream]):
        self.model = model
        self.n_walks = n_walks
        self.streams = streams
        self.pos_blocks = []
        self.neg_blocks = []
        self.span = 0
        self._grow(span)

    def _grow(self, size: int) -> None:
        rng = self.streams[len(self.pos_blocks)]
        self.pos_blocks.append(expit(-draw_steps(self.model, (self.n_walks, size), rng)))
        self.neg_blocks.append(expit(-draw_steps(self.model, (self.n_walks, size), rng)))
        self.span += size
        positive = np.concatenate(self.pos_blocks, axis=1)
        negative = np.concatenate(self.neg_blocks, axis=1)
        # columns: sites -span..-1 then 0..span-1
        self.omega = np.concatenate([negative[:, ::-1], positive], axis=1)

    def double(self) -> None:
        self._grow(self.span)

    @property
    def doublings(self) -> int:
        return len(self.pos_blocks) - 1


def _walk_batch(model: StepModel, checkpoints: Sequence[int], n_walks: int, span: int,
                rng: RandomStream) -> Tuple[np.ndarray, int]:
    """
    sup_{k <= n} Z_k at each checkpoint n for a batch of annealed walks

    Returns (sups of shape (n_walks, len(checkpoints)), span doublings).
    """
    env_streams = rng.spawn(RWRE_MAX_SPAN_DOUBLINGS + 1)
    env = _BatchEnvironment(model, n_walks, span, env_streams)
    rows = np.arange(n_walks)
    position = np.zeros(n_walks, dtype=np.int64)
    top = np.zeros(n_walks, dtype=np.int64)
    sups = np.zeros((n_walks, len(checkpoints)), dtype=np.int64)
    horizon = int(checkpoints[-1])
    chunk = max(1, MC_CELL_BUDGET // n_walks)
    next_checkpoint = 0
    while next_checkpoint < len(checkpoints) and checkpoints[next_checkpoint] == 0:
        next_checkpoint += 1

    step = 0
    while step < horizon:
        uniforms = rng.random((min(chunk, horizon - step), n_walks))
        for u in uniforms:
            position += np.where(u < env.omega[rows, position + env.span], 1, -1)
            np.maximum(top, position, out=top)
            step += 1
            while next_checkpoint < len(checkpoints) and checkpoints[next_checkpoint] == step:
                sups[:, next_checkpoint] = top
                next_checkpoint += 1
            if position.max() >= env.span or position.min() < -env.span:
                if env.doublings >= RWRE_MAX_SPAN_DOUBLINGS:
                    raise RangeError(f"walks left [-{env.span}, {env.span}) after "
                                     f"{RWRE_MAX_SPAN_DOUBLINGS} span doublings")
                env.double()
                logger.info(f"🔄 environment span doubled to {env.span} at step {step}")
    return sups, env.doublings


@dataclass(frozen=True, eq=False)
class SupProfile:
    """Running suprema of annealed walks read at increasing checkpoints"""
    checkpoints: Tuple[int, ...]
    sups: np.ndarray  # (n_walks, len(checkpoints))
    span: int
    span_doublings: Tuple[int, ...]  # per batch
    seed: int

    @property
    def n_walks(self) -> int:
        return int(self.sups.shape[0])

    def at(self, n: int) -> np.ndarray:
        return self.sups[:, self.checkpoints.index(int(n))]


def annealed_sup_profile(model: StepModel, n_grid: Sequence[int], n_walks: int, rng: RandomStream,
                         span: Optional[int] = None, batch_size: int = RWRE_BATCH_SIZE) -> SupProfile:
    """
    sup_{k <= n} Z_k for every n of n_grid, one fresh environment per walk

    Environments start at half-width `span` (default `default_span(max n)`)
    and are doubled, with the walks continuing, whenever a walk reaches the
    edge. Walks are advanced together in batches of `batch_size`.
    """
    checkpoints = tuple(sorted(int(n) for n in n_grid))
    if not checkpoints or checkpoints[0] < 1:
        raise DomainError(f"n_grid must hold positive horizons, got {list(n_grid)}")
    if n_walks < 1:
        raise DomainError(f"n_walks must be >= 1, got {n_walks}")
    seed = stream_seed(rng)
    span = default_span(checkpoints[-1]) if span is None else int(span)
    parts, doublings = [], []
    for start in range(0, n_walks, batch_size):
        count = min(batch_size, n_walks - start)
        batch_sups, batch_doublings = _walk_batch(model, checkpoints, count, span, rng)
        parts.append(batch_sups)
        doublings.append(batch_doublings)
    if any(doublings):
        logger.warning(f"🔄 environment span doubled in {sum(1 for d in doublings if d)}/{len(doublings)} batches")
    return SupProfile(checkpoints, np.concatenate(parts, axis=0), span, tuple(doublings), seed)


def merge_profiles(parts: Sequence[SupProfile]) -> SupProfile:
    """Stack profiles of independent walk batches taken on the same checkpoints"""
    parts = list(parts)
    if not parts:
        raise ValueError("no profiles to merge")
    if any(part.checkpoints != parts[0].checkpoints for part in parts):
        raise ValueError("profiles were taken on different checkpoints")
    return SupProfile(parts[0].checkpoints, np.concatenate([part.sups for part in parts], axis=0),
                      parts[0].span, tuple(d for part in parts for d in part.span_doublings), parts[0].seed)


@dataclass(frozen=True, eq=False)
class AnnealedSample:
    """sup_{k <= n} Z_k / a_inv(log n) over walks with fresh environments"""
    values: np.ndarray
    sups: np.ndarray
    n: int
    normalization: float
    seed: int
    meta: Dict[str, Any] = field(default_factory=dict)


def normalized_sample(model: StepModel, profile: SupProfile, n: int) -> AnnealedSample:
    normalization = model.nf.a_inv(math.log(n))
    raw = profile.at(n)
    return AnnealedSample(raw / normalization, raw, int(n), normalization, profile.seed,
                          {'span': profile.span, 'span_doublings': list(profile.span_doublings),
                           'clock': 'discrete chain (no embedding clock)'})


def annealed_sup_distribution(model: StepModel, n: int, n_walks: int, rng: RandomStream,
                              span: Optional[int] = None, batch_size: int = RWRE_BATCH_SIZE) -> AnnealedSample:
    """
    Normalized suprema sup_{k <= n} Z_k / a_inv(log n), one environment per walk

    The span doubling count of each batch is in meta['span_doublings'].
    The normalization is meant for n >= 1000; smaller n logs a warning and runs.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n < 1000:
        logger.warning(f"⚠️  annealed_sup_distribution at n={n}: normalization is meant for n >= 1000")
    profile = annealed_sup_profile(model, [n], n_walks, rng, span, batch_size)
    return normalized_sample(model, profile, n)


# ========================================
# Envelope diagnostics
# ========================================

@dataclass(frozen=True)
class EnvelopeRow:
    n: int
    beta: float
    levels: Tuple[float, ...]
    quantiles: Tuple[float, ...]  # sup (loglog n)^beta / a_inv(log n)
    ci_low: Tuple[float, ...]
    ci_high: Tuple[float, ...]
    lll_quantiles: Tuple[float, ...]  # sup / (a_inv(log n) logloglog n)

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.n, 'beta': self.beta, 'levels': list(self.levels), 'quantiles': list(self.quantiles),
                'ci_low': list(self.ci_low), 'ci_high': list(self.ci_high),
                'lll_quantiles': list(self.lll_quantiles)}


def quantile_ci(sample: np.ndarray, level: float, confidence: float = 0.95) -> Tuple[float, float, float]:
    """Empirical quantile with a distribution-free order-statistic interval"""
    ordered = np.sort(np.asarray(sample, dtype=float))
    m = ordered.size
    tail = (1.0 - confidence) / 2.0
    lo = int(np.clip(binom.ppf(tail, m, level) - 1, 0, m - 1))
    hi = int(np.clip(binom.ppf(1.0 - tail, m, level), 0, m - 1))
    return float(np.quantile(ordered, level)), float(ordered[lo]), float(ordered[hi])


def envelope_table(model: StepModel, profile: SupProfile, betas: Sequence[float] = (0.0, 0.5, 1.0, 2.0),
                   levels: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9)) -> List[EnvelopeRow]:
    """|checkpoints| x |betas| quantile rows of the normalized supremum"""
    if profile.checkpoints[0] < 16:
        raise DomainError(f"checkpoints must start at 16 or more (logloglog n > 0), got {profile.checkpoints[0]}")
    sups = profile.sups.astype(float)
    rows = []
    for column, n in enumerate(profile.checkpoints):
        log_n = math.log(n)
        base = model.nf.a_inv(log_n)
        lll = sups[:, column] / (base * math.log(math.log(log_n)))
        lll_quantiles = tuple(float(np.quantile(lll, level)) for level in levels)
        for beta in betas:
            scaled = sups[:, column] * math.log(log_n) ** beta / base
            stats = [quantile_ci(scaled, level) for level in levels]
            rows.append(EnvelopeRow(n, float(beta), tuple(levels), tuple(s[0] for s in stats),
                                    tuple(s[1] for s in stats), tuple(s[2] for s in stats), lll_quantiles))
    return rows


def envelope_diagnostic(model: StepModel, n_grid: Sequence[int], n_walks: int, rng: RandomStream,
                        betas: Sequence[float] = (0.0, 0.5, 1.0, 2.0),
                        levels: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9),
                        span: Optional[int] = None, batch_size: int = RWRE_BATCH_SIZE) -> List[EnvelopeRow]:
    """
    Quantile table of the normalized supremum along a doubling n-grid

    One ensemble of walks is run to max(n_grid) and its running supremum read
    at every n of the grid, giving |n_grid| x |betas| rows.
    """
    profile = annealed_sup_profile(model, n_grid, n_walks, rng, span, batch_size)
    return envelope_table(model, profile, betas, levels)


# ========================================
# liminf classifiers
# ========================================

class Classification(str, Enum):
    ZERO = 'Zero'
    INFINITE = 'Infinite'
    UNDETERMINED = 'Undetermined'


def theorem_classifiers(beta: float, q: float, normal_attraction: bool = True) -> Classification:
    """
    liminf of sup_{s <= t} X_s / f(t) for f(t) = a_inv(log t) / (loglog t)^beta

    Zero for beta < 1/q, Infinite for beta > 1/q. At beta = 1/q the answer
    is Infinite under normal attraction and left Undetermined otherwise.
    With distinct step laws on the two sides, q is the negative side's.

    Examples:
        >>> theorem_classifiers(1.0, 0.5).value, theorem_classifiers(2.0, 0.5).value
        ('Zero', 'Infinite')
    """
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    if not 0 < q < 1:
        raise DomainError(f"q must be in (0, 1), got {q}")
    critical = 1.0 / q
    if math.isclose(beta, critical, rel_tol=1e-12, abs_tol=1e-12):
        return Classification.INFINITE if normal_attraction else Classification.UNDETERMINED
    return Classification.ZERO if beta < critical else Classification.INFINITE


def theorem2b_classifier(beta: float) -> Classification:
    """liminf of sup_{s <= t} |X_s| / f(t) for jumps of both signs: Zero iff beta <= 1/2"""
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    return Classification.ZERO if beta <= 0.5 else Classification.INFINITE
