"""
Quenched hitting times of the diffusion in a random potential, and the limit variable Xi

For the diffusion X in the potential V (generator (1/2) e^V d/dx (e^-V d/dx))
started at 0, the hitting time of v > 0 splits as sigma = I1 + I2:

    I1 = A(v) int_0^v   e^{-V(s)}  R2((A(v) - A(s)) / A(v)) ds
    I2 = A(v) int_0^inf e^{-V(-s)} Z0(-A(-s) / A(v)) ds

with A the scale function, R2 a squared Bessel process of dimension 2
started at 0 and Z0 one of dimension 0 started at R2(1), run until it is
absorbed at 0. The integrals are computed by midpoint quadrature on the
unit segments of V subdivided to the mesh, in log space.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from config import MC_CELL_BUDGET, QUENCHED_BACKWARD_SPAN, XI_HORIZON_CAP_STEPS
from services.environment import Environment
from services.fluctuations import Direction, reflected_range, running_extrema, sample_passage_times, undershoot_U
from services.mittag_leffler import LimitLawSpec, sample_r1
from services.stable_core import StableLaw, grid_monitoring_shift, sample_stable
from utils.errors import DomainError, HorizonExceeded, RangeError, TruncatedI2
from utils.random_streams import RandomStream

logger = logging.getLogger(__name__)

# Poisson rates above this switch the dimension-0 transition to its normal limit
_POISSON_RATE_LIMIT = 1e12
# Clock values beyond exp(_LOG_CLOCK_CAP) absorb every dimension-0 path
_LOG_CLOCK_CAP = 700.0


# ========================================
# Scale function
# ========================================

def _segment_cells(length: float, mesh: float) -> int:
    return max(1, int(math.ceil(length / mesh - 1e-12)))


def _side_cells(values: np.ndarray, end: float, mesh: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature cells on [0, end] for a side whose segment k = [k, k+1) carries values[k]

    Returns (log cell widths, segment value per cell).
    """
    n_full = int(math.floor(end))
    lengths = [1.0] * n_full
    if end - n_full > 1e-12:
        lengths.append(end - n_full)
    widths, cell_values = [], []
    for k, length in enumerate(lengths):
        n_cells = _segment_cells(length, mesh)
        widths.append(np.full(n_cells, length / n_cells))
        cell_values.append(np.full(n_cells, values[k]))
    if not widths:
        return np.zeros(0), np.zeros(0)
    return np.log(np.concatenate(widths)), np.concatenate(cell_values)


def _log_scale(values: np.ndarray, end: float) -> float:
    """log of int_0^end e^{V} for a side with unit segments"""
    n_full = int(math.floor(end))
    parts = list(values[:n_full])
    weights = [1.0] * n_full
    if end - n_full > 1e-12:
        parts.append(values[n_full])
        weights.append(end - n_full)
    if not parts:
        return -math.inf
    return float(logsumexp(np.asarray(parts), b=np.asarray(weights)))


def scale_A(env: Environment, x: float) -> float:
    """
    Signed scale function A(x) = int_0^x e^{V(y)} dy, exact on the piecewise-constant potential

    Segment [k, k+1) carries V_k and segment (-k-1, -k] carries V_-k, so the
    integral is defined on [-(L+1), R+1] for an environment on [-L, R].

    Examples:
        >>> scale_A(Environment([1.0], [0.0]), 2.0) == 1.0 + math.e
        True
    """
    lo, hi = env.span
    if not lo - 1 <= x <= hi + 1:
        raise RangeError(f"x={x} outside the scale-function domain [{lo - 1}, {hi + 1}]")
    if x >= 0:
        return math.exp(_log_scale(env.potential_pos, x)) if x > 0 else 0.0
    return -math.exp(_log_scale(env.potential_neg, -x))


# ========================================
# Squared Bessel processes
# ========================================

@dataclass(frozen=True, eq=False)
class BesselGridPath:
    dimension: int
    start: float
    times: np.ndarray
    values: np.ndarray

    @property
    def absorbed(self) -> bool:
        return self.dimension == 0 and bool(self.values[-1] == 0.0)


def besq_transition(dimension: int, x: np.ndarray, dt, rng: RandomStream) -> np.ndarray:
    """
    Exact one-step transition of BESQ(dimension) from x over dt (vectorized)

    Dimension 2 is dt times a noncentral chi-square with 2 degrees of freedom
    and noncentrality x/dt; dimension 0 is a Poisson(x/(2dt)) mixture of
    Gamma(N, 2dt) laws, with an atom at 0 for N = 0.
    """
    x = np.asarray(x, dtype=float)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), x.shape)
    out = x.copy()
    moving = dt > 0
    if not moving.any():
        return out
    xm, dtm = x[moving], dt[moving]
    if dimension == 2:
        out[moving] = dtm * rng.noncentral_chisquare(2.0, xm / dtm)
        return out
    if dimension != 0:
        raise DomainError(f"only dimensions 0 and 2 are supported, got {dimension}")

    rate = np.where(np.isfinite(dtm), xm / (2.0 * dtm), 0.0)
    huge = rate > _POISSON_RATE_LIMIT
    n_jumps = rng.poisson(np.where(huge, 0.0, rate))
    draws = np.where(n_jumps > 0, rng.gamma(np.maximum(n_jumps, 1), 1.0), 0.0)
    result = 2.0 * np.where(np.isfinite(dtm), dtm, 0.0) * draws
    if huge.any():
        normal = rng.standard_normal(int(huge.sum()))
        result[huge] = np.maximum(xm[huge] + 2.0 * np.sqrt(xm[huge] * dtm[huge]) * normal, 0.0)
    out[moving] = result
    return out


def sample_besq_path(dimension: int, start: float, grid: Sequence[float], rng: RandomStream) -> BesselGridPath:
    """
    BESQ(dimension) started at `start`, sampled exactly on `grid`

    Examples:
        >>> import numpy as np
        >>> sample_besq_path(0, 0.0, [0, 1, 2], np.random.default_rng(1)).values.tolist()
        [0.0, 0.0, 0.0]
    """
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
        raise DomainError("grid must be a 1-d sequence starting at 0")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise DomainError("grid must be strictly increasing")
    if start < 0:
        raise DomainError(f"start must be >= 0, got {start}")
    values = np.empty(times.size)
    values[0] = start
    current = np.array([float(start)])
    for i, dt in enumerate(np.diff(times), start=1):
        current = besq_transition(dimension, current, dt, rng)
        values[i] = current[0]
    return BesselGridPath(dimension, float(start), times, values)


# ========================================
# Quenched hitting times
# ========================================

@dataclass(frozen=True)
class QuenchedHit:
    v: float
    sigma: float
    i1: float
    i2: float
    mesh: float
    log_sigma: float = field(default=math.nan)

    def __post_init__(self):
        if math.isnan(self.log_sigma):
            object.__setattr__(self, 'log_sigma', float(np.logaddexp(math.log(self.i1), math.log(self.i2))))


@dataclass(frozen=True, eq=False)
class QuenchedBatch:
    """
    Hitting-time samples of one environment

    log_i2 holds the partial (lower-bound) value for truncated samples.
    """
    v: float
    mesh: float
    log_i1: np.ndarray
    log_i2: np.ndarray
    truncated: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def log_sigma(self) -> np.ndarray:
        return np.logaddexp(self.log_i1, self.log_i2)

    @property
    def n_truncated(self) -> int:
        return int(self.truncated.sum())

    def hits(self) -> List[QuenchedHit]:
        """Untruncated samples"""
        return [QuenchedHit(self.v, float(np.exp(ls)), float(np.exp(l1)), float(np.exp(l2)), self.mesh, float(ls))
                for l1, l2, ls, cut in zip(self.log_i1, self.log_i2, self.log_sigma, self.truncated) if not cut]


def _add_cell(acc: np.ndarray, log_weight: float, values: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.logaddexp(acc, log_weight + np.log(values))


def quenched_hitting_times(env: Environment, v: float, mesh: float, n_samples: int, rng: RandomStream,
                           backward_span: Optional[int] = QUENCHED_BACKWARD_SPAN) -> QuenchedBatch:
    """
    n_samples independent draws of sigma_X(v) = I1 + I2 in one environment

    The Bessel paths advance cell by cell, vectorized across samples; on the
    negative side only unabsorbed samples keep running. Samples still
    unabsorbed at the end of the backward span are flagged as truncated.

    Args:
        env: environment spanning [-L, v]
        v: target level (> 0)
        mesh: quadrature cell length
        n_samples: number of draws
        rng: random stream
        backward_span: negative-side segments to use (None: all of env)
    """
    lo, hi = env.span
    if not 0 < v <= hi:
        raise RangeError(f"v={v} outside the forward span (0, {hi}]")
    if not mesh > 0:
        raise DomainError(f"mesh must be > 0, got {mesh}")
    span_neg = -lo if backward_span is None else min(int(backward_span), -lo)
    if span_neg < 1:
        raise RangeError("environment has no negative side")

    # forward cells: weight A(v) e^{-V} h, clock (A(v) - A(midpoint)) / A(v)
    log_h, values = _side_cells(env.potential_pos, v, mesh)
    log_mass = values + log_h
    log_a_v = float(logsumexp(log_mass))
    tail_after = np.concatenate([np.logaddexp.accumulate(log_mass[::-1])[::-1][1:], [-np.inf]])
    clock = np.exp(np.logaddexp(tail_after, log_mass - math.log(2.0)) - log_a_v)
    log_weight = log_a_v - values + log_h

    # R2 along the increasing clock, i.e. cells from v back to 0, then to clock 1
    order = np.argsort(clock, kind='stable')
    r2 = np.zeros(n_samples)
    log_i1 = np.full(n_samples, -np.inf)
    previous = 0.0
    for j in order:
        r2 = besq_transition(2, r2, clock[j] - previous, rng)
        log_i1 = _add_cell(log_i1, log_weight[j], r2)
        previous = clock[j]
    z0 = besq_transition(2, r2, 1.0 - previous, rng)

    # backward cells: segment k carries V_-k, clock B(midpoint) / A(v)
    log_hb, values_b = _side_cells(env.potential_neg, span_neg, mesh)
    log_mass_b = values_b + log_hb
    before = np.concatenate([[-np.inf], np.logaddexp.accumulate(log_mass_b)[:-1]])
    log_clock_b = np.logaddexp(before, log_mass_b - math.log(2.0)) - log_a_v
    log_weight_b = log_a_v - values_b + log_hb

    log_i2 = np.full(n_samples, -np.inf)
    alive = np.flatnonzero(z0 > 0)
    z = z0[alive]
    previous = 0.0
    for j in range(log_mass_b.size):
        if alive.size == 0:
            break
        current = math.exp(log_clock_b[j]) if log_clock_b[j] < _LOG_CLOCK_CAP else math.inf
        z = besq_transition(0, z, current - previous if current < math.inf else math.inf, rng)
        log_i2[alive] = _add_cell(log_i2[alive], log_weight_b[j], z)
        keep = z > 0
        alive, z = alive[keep], z[keep]
        previous = current

    truncated = np.zeros(n_samples, dtype=bool)
    truncated[alive] = True
    if alive.size:
        logger.warning(f"⚠️  {alive.size}/{n_samples} I2 samples unabsorbed within {span_neg} backward segments")
    return QuenchedBatch(float(v), float(mesh), log_i1, log_i2, truncated,
                         {'backward_span': span_neg, 'log_scale_v': log_a_v})


def quenched_hitting_time(env: Environment, v: float, mesh: float, rng: RandomStream,
                          backward_span: Optional[int] = QUENCHED_BACKWARD_SPAN) -> QuenchedHit:
    """
    One draw of sigma_X(v)

    Raises:
        TruncatedI2: dimension-0 clock not absorbed within the backward span
    """
    batch = quenched_hitting_times(env, v, mesh, 1, rng, backward_span)
    if batch.truncated[0]:
        raise TruncatedI2(f"I2 unabsorbed within {batch.meta['backward_span']} backward segments at v={v}",
                          float(np.exp(batch.log_i2[0])))
    return batch.hits()[0]


def shifted_environment(env: Environment, level: int) -> Environment:
    """The potential seen from an integer level: V'(x) = V(level + x) - V(level)"""
    if not 0 <= level <= env.span[1]:
        raise RangeError(f"level {level} outside the forward span")
    steps_neg = np.concatenate([-env.steps_pos[:level][::-1], env.steps_neg])
    return Environment(env.steps_pos[level:], steps_neg, env.model, env.model_neg, env.seed)


def coupled_hitting_times(env: Environment, levels: Sequence[int], mesh: float, rng: RandomStream,
                          backward_span: Optional[int] = QUENCHED_BACKWARD_SPAN) -> np.ndarray:
    """
    log sigma_X at increasing integer levels from a single path

    sigma(v_k+1) = sigma(v_k) + the hitting time of v_k+1 - v_k by the
    diffusion restarted at v_k, drawn in the environment seen from v_k, so
    the returned values are nondecreasing in the level.
    """
    levels = [int(level) for level in levels]
    if not levels or levels[0] < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise DomainError("levels must be strictly increasing positive integers")
    log_sigma = -math.inf
    out = []
    base = 0
    for level in levels:
        shifted = shifted_environment(env, base)
        span = None if backward_span is None else backward_span + base
        hit = quenched_hitting_time(shifted, level - base, mesh, rng, span)
        log_sigma = float(np.logaddexp(log_sigma, hit.log_sigma))
        out.append(log_sigma)
        base = level
    return np.asarray(out)


def surrogate_log_sigma(env: Environment, v: float) -> float:
    """
    V^#_v max U~_V(max_{[0,v]} V): the leading term of log sigma_X(v)

    Raises:
        NotAttained: backward passage above the forward maximum not within span
    """
    grid = env.to_grid()
    sharp = reflected_range(grid, v).z_sharp
    top = running_extrema(grid, v).sup
    return max(sharp, undershoot_U(grid, top, Direction.BACKWARD))


# ========================================
# Xi = (S^#_1 v U~_S(max_{[0,1]} S))^(-alpha)
# ========================================

@dataclass(frozen=True, eq=False)
class XiSample:
    values: np.ndarray
    n_requested: int
    exceeded: int
    mesh: int

    @property
    def failure_rate(self) -> float:
        return self.exceeded / self.n_requested


def _forward_functionals(law: StableLaw, mesh: int, n: int, rng: RandomStream) -> Tuple[np.ndarray, np.ndarray]:
    """(S^#_1, max S) on [0, 1] for n grid paths"""
    scale = (1.0 / mesh) ** (1.0 / law.alpha)
    path = np.cumsum(scale * sample_stable(law, rng, size=(n, mesh)), axis=1)
    path = np.concatenate([np.zeros((n, 1)), path], axis=1)
    sharp = (path - np.minimum.accumulate(path, axis=1)).max(axis=1)
    return sharp, path.max(axis=1)


def _backward_undershoot(law: StableLaw, levels: np.ndarray, mesh: int, rng: RandomStream,
                         forward_shift: float, cap_steps: int) -> np.ndarray:
    """
    U~ at the given levels for independent backward paths (nan when unresolved)

    The backward path x -> S_-x is minus an independent copy S'. Segment 0
    covers [0, 1] with `mesh` steps; segment r >= 1 covers [2^(r-1), 2^r]
    with `mesh` steps, doubling the step each time.
    """
    n = levels.size
    result = np.full(n, np.nan)
    resolved = levels <= 0
    result[resolved] = 0.0
    position = np.zeros(n)
    running_max = np.zeros(n)
    max_shift = np.zeros(n)
    segment = 0
    while (~resolved).any() and (segment + 1) * mesh <= cap_steps:
        idx = np.flatnonzero(~resolved)
        dt = (1.0 if segment == 0 else 2.0 ** (segment - 1)) / mesh
        shift = grid_monitoring_shift(law, dt)
        path = position[idx, None] + np.cumsum(dt ** (1.0 / law.alpha) * sample_stable(law, rng, size=(idx.size, mesh)),
                                               axis=1)
        # backward value -S' reaches the level once S' <= -(level + forward shift - shift)
        target = -(levels[idx] + forward_shift - shift)
        hit = path <= target[:, None]
        done = hit.any(axis=1)
        first = np.where(done, hit.argmax(axis=1), mesh - 1)
        before = np.where(np.arange(mesh)[None, :] <= first[:, None], path, -np.inf).max(axis=1)
        improved = before > running_max[idx]
        max_shift[idx[improved]] = shift
        running_max[idx] = np.maximum(running_max[idx], before)
        finished = idx[done]
        result[finished] = (levels[finished] + forward_shift + running_max[finished] + max_shift[finished])
        resolved[finished] = True
        position[idx] = path[:, -1]
        segment += 1
    return result


def sample_xi(law: StableLaw, mesh: int, rng: RandomStream, size: Optional[int] = None,
              cap_steps: int = XI_HORIZON_CAP_STEPS, corrected: bool = True):
    """
    Draws of Xi from independent forward and backward grid paths

    With `corrected`, Gaussian grid extremes get the grid-monitoring shift.
    Without `size` a single float is returned and an unresolved backward
    passage raises HorizonExceeded; with `size` an XiSample is returned with
    unresolved draws excluded and counted.
    """
    if mesh < 2:
        raise ValueError(f"mesh must be >= 2 steps, got {mesh}")
    n = 1 if size is None else int(size)
    shift = grid_monitoring_shift(law, 1.0 / mesh) if corrected else 0.0
    batch = max(1, MC_CELL_BUDGET // mesh)
    values, exceeded = [], 0
    for start in range(0, n, batch):
        count = min(batch, n - start)
        sharp, top = _forward_functionals(law, mesh, count, rng)
        undershoot = _backward_undershoot(law, top, mesh, rng, shift if corrected else 0.0, cap_steps)
        ok = ~np.isnan(undershoot)
        exceeded += int((~ok).sum())
        functional = np.maximum(sharp[ok] + 2.0 * shift, undershoot[ok])
        xi = functional ** (-law.alpha)
        bad = ~(np.isfinite(xi) & (xi > 0))
        if bad.any():
            raise DomainError(f"{int(bad.sum())} Xi draws are not positive and finite (degenerate grid functional)")
        values.append(xi)
    values = np.concatenate(values) if values else np.zeros(0)

    if exceeded:
        logger.warning(f"⚠️  sample_xi: {exceeded}/{n} backward passages unresolved at {cap_steps} steps")
    if size is None:
        if exceeded:
            raise HorizonExceeded(f"backward passage unresolved after {cap_steps} steps")
        return float(values[0])
    return XiSample(values, n, exceeded, mesh)


def sample_xi_stopping(spec: LimitLawSpec, mesh: int, rng: RandomStream, size: int,
                       cap_steps: int = XI_HORIZON_CAP_STEPS, corrected: bool = True) -> XiSample:
    """
    Draws of Xi as tau^#_1 ^ tau_r1 with r1 independent of the forward path

    Only valid for the completely asymmetric laws.
    """
    law = spec.law()
    levels = np.asarray(sample_r1(spec, rng, size), dtype=float)
    passages = sample_passage_times(law, mesh, size, rng, sharp_level=1.0, plain_levels=levels,
                                    max_steps=cap_steps, corrected=corrected)
    return XiSample(passages.times, size, passages.exceeded, mesh)
