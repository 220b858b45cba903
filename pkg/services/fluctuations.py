"""
Path functionals, ladder structure and Monte Carlo estimators for
fluctuation quantities of the potential

Functionals act on CadlagGrid paths and are grid-exact. For a window
[0, a] (or [a, 0] when a < 0):

    running_extrema   sup, inf and sup |Z|
    reflected_range   Z_a - inf Z   and its running supremum Z^#_a
    first_passage     forward / backward hitting time of a level
    undershoot_U      level minus the infimum seen up to the passage
    tilde_G           max(backward undershoot at the forward supremum, Z^#_a)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    MC_CELL_BUDGET, RANGE_DECAY_MIN_SURVIVORS, RENEWAL_MAX_STEPS, EXIT_MAX_STEPS, STEP_CHUNK, XI_HORIZON_CAP_STEPS,
)
from services.cadlag import CadlagGrid
from services.environment import StepModel, draw_steps
from services.stable_core import StableLaw, grid_monitoring_shift, sample_stable
from utils.errors import DomainError, NotAttained, PartialLadder, Undecided
from utils.estimates import McEstimate
from utils.random_streams import RandomStream, stream_seed

logger = logging.getLogger(__name__)


__all__ = [
    'CadlagGrid', 'McEstimate', 'Direction', 'ExitSide', 'ExitVariant', 'Extrema', 'ReflectedRange',
    'Passage', 'LadderDecomposition', 'RangeCounts', 'RangePoint', 'RangeDecay',
    'running_extrema', 'reflected_range', 'first_passage', 'first_passage_detail', 'undershoot_U',
    'tilde_G', 'ladder_decomposition', 'renewal_estimate', 'exit_outcome', 'backward_exit_outcome',
    'estimate_exit_probability', 'range_survival_counts', 'merge_range_counts', 'fit_range_decay',
    'estimate_range_decay',
    'PassageSample', 'sample_passage_times', 'KilledExit', 'estimate_killed_exit',
]


class Direction(str, Enum):
    FORWARD = 'forward'
    BACKWARD = 'backward'


class ExitSide(str, Enum):
    UP_FIRST = 'UpFirst'
    DOWN_FIRST = 'DownFirst'


class ExitVariant(str, Enum):
    OPEN = 'open'      # strict thresholds: above y / below -x
    CLOSED = 'closed'  # non-strict thresholds: at or above y / at or below -x


class Extrema(NamedTuple):
    sup: float
    inf: float
    sup_abs: float


class ReflectedRange(NamedTuple):
    z_r: float
    z_sharp: float


class Passage(NamedTuple):
    time: float
    index: Optional[int]
    span_exhausted: bool


# ========================================
# Path functionals
# ========================================

def running_extrema(path: CadlagGrid, a: float) -> Extrema:
    """
    Supremum, infimum and supremum of |Z| over [0, a] or [a, 0]

    Examples:
        >>> running_extrema(CadlagGrid.from_values([0, 1, -1, 2]), 1.5)
        Extrema(sup=1.0, inf=0.0, sup_abs=1.0)
    """
    window = path.window(a)
    return Extrema(float(window.max()), float(window.min()), float(np.abs(window).max()))


def reflected_range(path: CadlagGrid, a: float) -> ReflectedRange:
    """
    Z reflected at its running infimum, and the running supremum of that

    Z^#_a equals the largest rise max_{u <= v <= a} (Z_v - Z_u).
    """
    window = path.window(a)
    reflected = window - np.minimum.accumulate(window)
    return ReflectedRange(float(reflected[-1]), float(reflected.max()))


def first_passage_detail(path: CadlagGrid, level: float,
                         direction: Union[Direction, str] = Direction.FORWARD) -> Passage:
    """
    First grid time at which Z (forward) or x -> Z_-x (backward) reaches level

    Levels >= 0 are reached from below (Z >= level), negative levels from
    above (Z <= level). Ties go to the left-most grid index.
    """
    direction = Direction(direction)
    if direction == Direction.FORWARD:
        values, times = path.forward_values, path.forward_times
    else:
        values, times = path.backward_values, path.backward_times
    hit = values >= level if level >= 0 else values <= level
    if not hit.any():
        return Passage(math.inf, None, True)
    index = int(np.argmax(hit))
    return Passage(float(times[index]), index, False)


def first_passage(path: CadlagGrid, level: float,
                  direction: Union[Direction, str] = Direction.FORWARD) -> float:
    """Passage time, math.inf when the level is not reached within the span"""
    return first_passage_detail(path, level, direction).time


def undershoot_U(path: CadlagGrid, a: float, direction: Union[Direction, str] = Direction.FORWARD) -> float:
    """
    a minus the infimum of Z over the window traversed until the passage above a

    Examples:
        >>> undershoot_U(CadlagGrid.from_values([0, 1, -1, 2]), 2.0)
        3.0
    """
    if a < 0:
        raise DomainError(f"undershoot is defined for a >= 0, got {a}")
    direction = Direction(direction)
    passage = first_passage_detail(path, a, direction)
    if passage.span_exhausted:
        raise NotAttained(f"{direction.value} passage above {a} not attained within span {path.span}")
    values = path.forward_values if direction == Direction.FORWARD else path.backward_values
    return float(a - values[:passage.index + 1].min())


def tilde_G(path: CadlagGrid, a: float) -> float:
    """Backward undershoot at the forward supremum over [0, a], maxed with Z^#_a"""
    if a < 0:
        raise DomainError(f"tilde_G is defined for a >= 0, got {a}")
    sup = running_extrema(path, a).sup
    return max(undershoot_U(path, sup, Direction.BACKWARD), reflected_range(path, a).z_sharp)


# ========================================
# Ladder structure
# ========================================

@dataclass(frozen=True)
class LadderDecomposition:
    """
    Strict descending ladder epochs T, heights H = -V_T and segment maxima M

    M[k] is the maximum of V + H_k over the segment [T_k, T_{k+1}), so it
    holds M_1, ..., M_n for n ladders.
    """
    T: np.ndarray
    H: np.ndarray
    M: np.ndarray
    complete: bool = True

    @property
    def n_ladders(self) -> int:
        return int(self.T.size - 1)


def _ladder_arrays(potential: np.ndarray, epochs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    heights = -potential[epochs]
    if epochs.size < 2:
        return heights, np.zeros(0)
    maxima = np.maximum.reduceat(potential[:epochs[-1]], epochs[:-1]) + heights[:-1]
    return heights, maxima


def ladder_decomposition(steps: Sequence[float], n_ladders: int) -> LadderDecomposition:
    """
    First n_ladders strict descending ladder epochs of the walk with the given steps

    Examples:
        >>> ladder = ladder_decomposition([-1, 2, -3], 2)
        >>> ladder.T.tolist(), ladder.H.tolist(), ladder.M.tolist()
        ([0, 1, 3], [0.0, 1.0, 2.0], [0.0, 2.0])
    """
    if n_ladders < 1:
        raise ValueError(f"n_ladders must be >= 1, got {n_ladders}")
    potential = np.concatenate([[0.0], np.cumsum(np.asarray(steps, dtype=float))])
    running_min = np.minimum.accumulate(potential)
    records = np.flatnonzero(potential[1:] < running_min[:-1]) + 1
    epochs = np.concatenate([[0], records]).astype(int)

    if records.size < n_ladders:
        heights, maxima = _ladder_arrays(potential, epochs)
        partial = LadderDecomposition(epochs, heights, maxima, complete=False)
        raise PartialLadder(
            f"only {records.size} of {n_ladders} ladder epochs within {len(potential) - 1} steps",
            partial, int(records.size))

    epochs = epochs[:n_ladders + 1]
    heights, maxima = _ladder_arrays(potential, epochs)
    return LadderDecomposition(epochs, heights, maxima)


def renewal_estimate(model: StepModel, x: float, n_paths: int, rng: RandomStream,
                     max_steps: int = RENEWAL_MAX_STEPS) -> McEstimate:
    """
    Estimate U_H(x) = E #{n >= 0 : H_n <= x}

    Each path runs until its running minimum drops to -x or below; heights
    increase strictly, so no later ladder point can count. Paths still short
    of -x after `max_steps` are excluded and counted in meta['truncated'].
    """
    if not x > 0:
        raise DomainError(f"x must be > 0, got {x}")
    counts = np.ones(n_paths)  # H_0 = 0
    position = np.zeros(n_paths)
    running_min = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    steps_done = 0

    while active.any() and steps_done < max_steps:
        idx = np.flatnonzero(active)
        m = int(min(STEP_CHUNK, max(1, MC_CELL_BUDGET // idx.size), max_steps - steps_done))
        path = position[idx, None] + np.cumsum(draw_steps(model, (idx.size, m), rng), axis=1)
        prev_min = np.minimum.accumulate(np.concatenate([running_min[idx, None], path], axis=1), axis=1)
        is_record = path < prev_min[:, :-1]
        counts[idx] += (is_record & (-path <= x)).sum(axis=1)
        position[idx] = path[:, -1]
        running_min[idx] = prev_min[:, -1]
        active[idx] = -running_min[idx] < x
        steps_done += m

    truncated = int(active.sum())
    if truncated:
        logger.warning(f"⚠️  renewal_estimate: {truncated}/{n_paths} paths did not reach -{x} "
                       f"within {max_steps} steps (excluded)")
    kept = counts[~active]
    if kept.size == 0:
        raise NotAttained(f"no path reached -{x} within {max_steps} steps")
    return McEstimate.from_samples(kept, stream_seed(rng),
                                   {'x': x, 'truncated': truncated, 'max_steps': max_steps})


# ========================================
# Two-sided exit
# ========================================

def _exit_masks(values: np.ndarray, x: float, y: float, variant: ExitVariant):
    if variant == ExitVariant.OPEN:
        return values > y, values < -x
    return values >= y, values <= -x


def exit_outcome(steps: Iterable[float], x: float, y: float,
                 variant: Union[ExitVariant, str] = ExitVariant.OPEN) -> ExitSide:
    """
    Which side the walk with the given steps leaves (-x, y) through first

    Arrays and lists are scanned vectorized; other iterables are consumed
    lazily. The backward event is obtained from `backward_exit_outcome`.
    """
    if not (x > 0 and y > 0):
        raise DomainError(f"x and y must be > 0, got x={x}, y={y}")
    variant = ExitVariant(variant)

    if isinstance(steps, (np.ndarray, list, tuple)):
        values = np.cumsum(np.asarray(steps, dtype=float))
        up, down = _exit_masks(values, x, y, variant)
        first_up = int(np.argmax(up)) if up.any() else None
        first_down = int(np.argmax(down)) if down.any() else None
        if first_up is None and first_down is None:
            raise Undecided(f"{values.size} steps never left (-{x}, {y})")
        if first_down is None or (first_up is not None and first_up < first_down):
            return ExitSide.UP_FIRST
        return ExitSide.DOWN_FIRST

    value = 0.0
    count = 0
    for step in steps:
        value += float(step)
        count += 1
        up, down = _exit_masks(value, x, y, variant)
        if up:
            return ExitSide.UP_FIRST
        if down:
            return ExitSide.DOWN_FIRST
    raise Undecided(f"stream ended after {count} steps without leaving (-{x}, {y})")


def backward_exit_outcome(steps_neg: Iterable[float], x: float, y: float) -> ExitSide:
    """
    Backward closed event: x -> V_-x reaches (-inf, -y] before [x, inf)

    Feeds the negated backward steps to `exit_outcome`, so UP_FIRST means
    the backward potential went down to -y first.
    """
    if isinstance(steps_neg, (np.ndarray, list, tuple)):
        return exit_outcome(-np.asarray(steps_neg, dtype=float), x, y, ExitVariant.CLOSED)
    return exit_outcome((-float(s) for s in steps_neg), x, y, ExitVariant.CLOSED)


def estimate_exit_probability(model: StepModel, x: float, y: float, n_paths: int, rng: RandomStream,
                              variant: Union[ExitVariant, str] = ExitVariant.OPEN,
                              max_steps: int = EXIT_MAX_STEPS) -> McEstimate:
    """
    MC estimate of P(UpFirst) for the walk leaving (-x, y)

    Undecided paths (still inside after max_steps) are excluded and counted.
    """
    variant = ExitVariant(variant)
    position = np.zeros(n_paths)
    outcome = np.zeros(n_paths, dtype=np.int8)  # 0 undecided, 1 up, -1 down
    steps_done = 0

    while (outcome == 0).any() and steps_done < max_steps:
        idx = np.flatnonzero(outcome == 0)
        m = int(min(STEP_CHUNK, max(1, MC_CELL_BUDGET // idx.size), max_steps - steps_done))
        path = position[idx, None] + np.cumsum(draw_steps(model, (idx.size, m), rng), axis=1)
        up, down = _exit_masks(path, x, y, variant)
        first_up = np.where(up.any(axis=1), up.argmax(axis=1), m)
        first_down = np.where(down.any(axis=1), down.argmax(axis=1), m)
        decided = (first_up < m) | (first_down < m)
        outcome[idx[decided]] = np.where(first_up[decided] < first_down[decided], 1, -1)
        position[idx] = path[:, -1]
        steps_done += m

    undecided = int((outcome == 0).sum())
    if undecided:
        logger.warning(f"⚠️  exit estimate: {undecided}/{n_paths} paths undecided after {max_steps} steps")
    decided_n = n_paths - undecided
    if decided_n == 0:
        raise Undecided(f"no path left (-{x}, {y}) within {max_steps} steps")
    return McEstimate.from_proportion(int((outcome == 1).sum()), decided_n, stream_seed(rng),
                                      {'x': x, 'y': y, 'variant': variant.value, 'undecided': undecided})


# ========================================
# Range decay
# ========================================

@dataclass(frozen=True)
class RangeCounts:
    """Survivor counts of {V^#_v <= x} (and jointly with {max V <= bar}) per v"""
    v_points: np.ndarray
    n_paths: int
    survivors: np.ndarray
    joint: np.ndarray


def range_survival_counts(model: StepModel, x: float, v_points: Sequence[int], n_paths: int,
                          rng: RandomStream, bar: Optional[float] = None) -> RangeCounts:
    """
    Count paths with V^#_v <= x at each v (and with max_{k <= v} V_k <= bar)

    V^# is nondecreasing in v, so paths are dropped as soon as it exceeds x.
    """
    v_points = np.asarray(sorted(int(v) for v in v_points))
    if v_points.size == 0 or v_points[0] < 1:
        raise ValueError("v_points must be positive integers")
    bar = math.inf if bar is None else bar
    survivors = np.zeros(v_points.size, dtype=np.int64)
    joint = np.zeros(v_points.size, dtype=np.int64)

    position = np.zeros(n_paths)
    running_min = np.zeros(n_paths)
    running_max = np.zeros(n_paths)
    sharp = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    steps_done = 0
    next_point = 0
    horizon = int(v_points[-1])

    while steps_done < horizon and alive.any():
        idx = np.flatnonzero(alive)
        m = int(min(STEP_CHUNK, max(1, MC_CELL_BUDGET // idx.size), horizon - steps_done))
        path = position[idx, None] + np.cumsum(draw_steps(model, (idx.size, m), rng), axis=1)
        mins = np.minimum(running_min[idx, None], np.minimum.accumulate(path, axis=1))
        maxs = np.maximum(running_max[idx, None], np.maximum.accumulate(path, axis=1))
        sharps = np.maximum(sharp[idx, None], np.maximum.accumulate(path - mins, axis=1))

        while next_point < v_points.size and v_points[next_point] <= steps_done + m:
            col = v_points[next_point] - steps_done - 1
            inside = sharps[:, col] <= x
            survivors[next_point] = int(inside.sum())
            joint[next_point] = int((inside & (maxs[:, col] <= bar)).sum())
            next_point += 1

        position[idx] = path[:, -1]
        running_min[idx] = mins[:, -1]
        running_max[idx] = maxs[:, -1]
        sharp[idx] = sharps[:, -1]
        alive[idx] = sharps[:, -1] <= x
        steps_done += m

    return RangeCounts(v_points, n_paths, survivors, joint)


@dataclass(frozen=True)
class RangePoint:
    v: int
    scaled_v: float  # v / a_inv(x)
    probability: McEstimate
    survivors: int
    one_sided: bool  # zero survivors: probability < 1/n only


@dataclass(frozen=True)
class RangeDecay:
    slope: McEstimate
    pointwise: List[RangePoint] = field(default_factory=list)


def merge_range_counts(parts: Sequence[RangeCounts]) -> RangeCounts:
    """Pool counts of independent batches run on the same v grid"""
    parts = list(parts)
    if not parts:
        raise ValueError("no range counts to merge")
    v_points = parts[0].v_points
    if any(not np.array_equal(part.v_points, v_points) for part in parts):
        raise ValueError("range counts were taken on different v grids")
    return RangeCounts(v_points, sum(part.n_paths for part in parts),
                       np.sum([part.survivors for part in parts], axis=0),
                       np.sum([part.joint for part in parts], axis=0))


def fit_range_decay(model: StepModel, x: float, counts: RangeCounts, seed: int,
                    min_survivors: int = RANGE_DECAY_MIN_SURVIVORS) -> RangeDecay:
    """
    Decay rate of P(V^#_v <= x) on the scale v / a_inv(x)

    Fits -log P against v / a_inv(x) by least squares over the points with at
    least `min_survivors` survivors. The slope's standard error uses the
    delta method with the exact covariance of nested survival indicators,
    Cov(log p_i, log p_j) = (1 / p_min(i,j) - 1) / n.
    """
    n_paths = counts.n_paths
    scale = model.nf.a_inv(x)

    pointwise = []
    for v, survived in zip(counts.v_points, counts.survivors):
        one_sided = survived == 0
        prob = McEstimate.from_proportion(int(survived), n_paths, seed,
                                          {'v': int(v), 'x': x, 'upper_bound': 1.0 / n_paths if one_sided else None})
        pointwise.append(RangePoint(int(v), float(v / scale), prob, int(survived), bool(one_sided)))

    usable = [pt for pt in pointwise if pt.survivors >= min_survivors]
    meta = {'x': x, 'points_used': len(usable), 'min_survivors': min_survivors}
    if len(usable) < 2:
        logger.warning(f"⚠️  range decay at x={x}: only {len(usable)} points with >= {min_survivors} survivors")
        return RangeDecay(McEstimate(float('nan'), float('inf'), n_paths, seed, meta), pointwise)

    t = np.array([pt.scaled_v for pt in usable])
    p = np.array([pt.probability.mean for pt in usable])
    y = -np.log(p)
    centred = t - t.mean()
    weights = centred / np.sum(centred ** 2)
    slope = float(np.sum(weights * y))
    # usable points are sorted by v, so the larger probability sits at the smaller index
    p_outer = p[np.minimum.outer(np.arange(p.size), np.arange(p.size))]
    covariance = (1.0 / p_outer - 1.0) / n_paths
    std_error = float(math.sqrt(max(weights @ covariance @ weights, 0.0)))
    return RangeDecay(McEstimate(slope, std_error, n_paths, seed, meta), pointwise)


def estimate_range_decay(model: StepModel, x: float, v_grid: Sequence[int], n_paths: int,
                         rng: RandomStream, min_survivors: int = RANGE_DECAY_MIN_SURVIVORS) -> RangeDecay:
    """
    Count survivors on v_grid and fit their decay rate (see `fit_range_decay`)

    v_grid must be increasing with v_max / v_min >= 4, so v / a_inv(x) spans
    at least a factor 4.
    """
    grid = [int(v) for v in v_grid]
    if len(grid) < 2 or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"v_grid must be increasing positive integers, got {grid}")
    if grid[-1] < 4 * grid[0]:
        raise DomainError(f"v_grid must span a factor of 4 or more, got {grid[0]}..{grid[-1]}")
    seed = stream_seed(rng)
    counts = range_survival_counts(model, x, v_grid, n_paths, rng)
    return fit_range_decay(model, x, counts, seed, min_survivors)


# ========================================
# Stable-process passages on a time grid
# ========================================

class PassageSample(NamedTuple):
    """Resolved passage times plus the count of paths still running at the step cap"""
    times: np.ndarray
    n_requested: int
    exceeded: int


def sample_passage_times(law: StableLaw, mesh: int, n_paths: int, rng: RandomStream,
                         sharp_level: float = 1.0, plain_levels: Optional[np.ndarray] = None,
                         max_steps: int = XI_HORIZON_CAP_STEPS, corrected: bool = True) -> PassageSample:
    """
    First grid time of {S^# >= sharp_level} (or {S >= plain_levels[i]} if earlier)

    S is the stable process on a grid of `mesh` steps per unit time. With
    `corrected`, levels are moved in by the Gaussian grid-monitoring shift
    (twice for S^#, whose grid value misses both the top and the running
    minimum).
    """
    if mesh < 1:
        raise ValueError(f"mesh must be >= 1 step per unit time, got {mesh}")
    dt = 1.0 / mesh
    shift = grid_monitoring_shift(law, dt) if corrected else 0.0
    sharp_target = sharp_level - 2.0 * shift
    plain_target = None if plain_levels is None else np.asarray(plain_levels, dtype=float) - shift
    scale = dt ** (1.0 / law.alpha)

    times = np.full(n_paths, np.inf)
    position = np.zeros(n_paths)
    running_min = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    if plain_target is not None:
        # a level at or below 0 is met at time 0
        times[plain_target <= 0] = 0.0
        alive &= plain_target > 0
    steps_done = 0

    while alive.any() and steps_done < max_steps:
        idx = np.flatnonzero(alive)
        m = int(min(STEP_CHUNK, max(1, MC_CELL_BUDGET // idx.size), max_steps - steps_done))
        path = position[idx, None] + np.cumsum(scale * sample_stable(law, rng, size=(idx.size, m)), axis=1)
        mins = np.minimum(running_min[idx, None], np.minimum.accumulate(path, axis=1))
        hit = (path - mins) >= sharp_target
        if plain_target is not None:
            hit |= path >= plain_target[idx, None]
        done = hit.any(axis=1)
        times[idx[done]] = (steps_done + hit[done].argmax(axis=1) + 1) * dt
        position[idx] = path[:, -1]
        running_min[idx] = mins[:, -1]
        alive[idx[done]] = False
        steps_done += m

    exceeded = int(alive.sum())
    if exceeded:
        logger.warning(f"⚠️  {exceeded}/{n_paths} passages unresolved after {max_steps} steps (excluded)")
    return PassageSample(times[~alive], n_paths, exceeded)


class KilledExit(NamedTuple):
    survive: McEstimate
    exit_low: McEstimate
    exit_high: McEstimate


def estimate_killed_exit(law: StableLaw, lower: float, upper: float, q: float, n_paths: int, mesh: int,
                         rng: RandomStream, max_steps: int = EXIT_MAX_STEPS) -> KilledExit:
    """
    Exit of (lower, upper) by S started at 0 before an independent Exp(q) clock

    Classifies each path as surviving (no exit before the clock), leaving at or
    below `lower`, or at or above `upper`. The last step before the clock is
    shortened to end exactly at it. For the Gaussian law, crossings between
    grid points are sampled from the Brownian-bridge crossing probability.
    """
    if not lower < 0 < upper:
        raise DomainError(f"need lower < 0 < upper, got ({lower}, {upper})")
    if not q > 0:
        raise DomainError(f"q must be > 0, got {q}")
    seed = stream_seed(rng)
    dt = 1.0 / mesh
    gaussian = law.alpha == 2
    clock = rng.exponential(1.0 / q, size=n_paths)
    outcome = np.zeros(n_paths, dtype=np.int8)  # 0 running, 1 survived, 2 low, 3 high
    position = np.zeros(n_paths)
    steps_done = 0

    while (outcome == 0).any() and steps_done < max_steps:
        idx = np.flatnonzero(outcome == 0)
        m = int(min(STEP_CHUNK, max(1, MC_CELL_BUDGET // idx.size), max_steps - steps_done))
        start = (steps_done + np.arange(m)) * dt
        durations = np.clip(clock[idx, None] - start[None, :], 0.0, dt)
        increments = durations ** (1.0 / law.alpha) * sample_stable(law, rng, size=(idx.size, m))
        path = position[idx, None] + np.cumsum(increments, axis=1)
        low = path <= lower
        high = path >= upper
        if gaussian:
            previous = np.concatenate([position[idx, None], path[:, :-1]], axis=1)
            variance = 2.0 * law.gamma * np.maximum(durations, 1e-300)
            inside = ~(low | high)
            p_low = np.exp(-2.0 * (previous - lower) * (path - lower) / variance)
            p_high = np.exp(-2.0 * (upper - previous) * (upper - path) / variance)
            u_low, u_high = rng.random((2, idx.size, m))
            low |= inside & (durations > 0) & (u_low < p_low)
            high |= inside & (durations > 0) & (u_high < p_high) & ~low

        first_low = np.where(low.any(axis=1), low.argmax(axis=1), m)
        first_high = np.where(high.any(axis=1), high.argmax(axis=1), m)
        exited = (first_low < m) | (first_high < m)
        outcome[idx[exited]] = np.where(first_low[exited] <= first_high[exited], 2, 3)
        expired = ~exited & (clock[idx] <= start[-1] + dt)
        outcome[idx[expired]] = 1
        position[idx] = path[:, -1]
        steps_done += m

    running = int((outcome == 0).sum())
    if running:
        logger.warning(f"⚠️  killed exit: {running}/{n_paths} paths still inside after {max_steps} steps (excluded)")
    n_done = n_paths - running
    if n_done == 0:
        raise Undecided(f"no path resolved within {max_steps} steps")
    meta = {'lower': lower, 'upper': upper, 'q': q, 'mesh': mesh, 'running': running,
            'bridge_corrected': gaussian}
    return KilledExit(*(McEstimate.from_proportion(int((outcome == code).sum()), n_done, seed, meta)
                        for code in (1, 2, 3)))
