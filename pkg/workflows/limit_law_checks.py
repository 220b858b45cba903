"""
Limit-law experiments: the Xi samplers, quenched hitting times of the
diffusion, the surrogate log sigma, and the Sinai walk's normalized supremum
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import ks_2samp, norm

from config import QUENCHED_DEFAULT_MESH, XI_DEFAULT_MESH, XI_FAILURE_BUDGET
from services.diffusion_quenched import quenched_hitting_times, sample_xi, sample_xi_stopping, surrogate_log_sigma
from services.environment import StepModel, build_environment
from services.mittag_leffler import LimitLawSpec, invert_laplace_cdf, laplace_xi
from services.rwre import annealed_sup_profile, envelope_table, merge_profiles, normalized_sample, quantile_ci
from services.stable_core import Spectral, StableLaw
from utils.errors import InversionUnstable, NotAttained
from utils.estimates import McEstimate, moments
from workflows.harness import ExperimentRun, Task, experiment

logger = logging.getLogger(__name__)


# ========================================
# xi-laplace-mc
# ========================================

def _xi_task(task: Task) -> Tuple[List[Tuple[float, float, int]], int]:
    payload = task.payload
    spec = LimitLawSpec(payload['alpha'], payload['spectral'])
    if payload['sampler'] == 'path':
        sample = sample_xi(spec.law(), payload['mesh'], task.stream(), size=task.size)
    else:
        sample = sample_xi_stopping(spec, payload['mesh'], task.stream(), task.size)
    return [moments(np.exp(-q * sample.values)) for q in payload['qs']], sample.exceeded


@experiment(
    'xi-laplace-mc',
    anchor="E exp(-q Xi) from both Xi samplers against the Mittag-Leffler closed forms",
    defaults={'cases': [[2.0, 'NoPositiveJumps'], [1.5, 'NoPositiveJumps'], [1.5, 'NoNegativeJumps']],
              'qs': [0.5, 1.0, 2.0], 'mesh': XI_DEFAULT_MESH, 'n_paths': 100_000, 'samplers': ['path', 'stopping']},
    quick={'mesh': 1024, 'n_paths': 10_000},
    budget='< 10 min',
)
def xi_laplace_mc(run: ExperimentRun) -> None:
    qs = [float(q) for q in run.params['qs']]
    mesh = int(run.params['mesh'])
    for alpha, spectral in run.params['cases']:
        alpha = float(alpha)
        spec = LimitLawSpec(alpha, spectral)
        for q in qs:
            run.add_value('laplace_xi', laplace_xi(spec, q), alpha=alpha, spectral=spectral, q=q)
        for sampler in run.params['samplers']:
            tasks = run.tasks(run.params['n_paths'], sampler, alpha, spectral, alpha=alpha, spectral=spectral,
                              sampler=sampler, mesh=mesh, qs=qs)
            results = run.map(_xi_task, tasks)
            exceeded = sum(count for _, count in results)
            point = {'alpha': alpha, 'spectral': spectral, 'sampler': sampler}
            failure_rate = exceeded / int(run.params['n_paths'])
            row = run.add_value('failure_rate', failure_rate, n=int(run.params['n_paths']), **point)
            if exceeded:
                run.warn('HorizonExceeded', f"{exceeded} draws unresolved", **point)
            run.check_bound('failure rate within budget', failure_rate, XI_FAILURE_BUDGET, row=row, **point)
            for i, q in enumerate(qs):
                estimate = McEstimate.from_moments([parts[i] for parts, _ in results], run.seed,
                                                   {'mesh': mesh, 'exceeded': exceeded})
                row = run.add_estimate('E exp(-q Xi)', estimate, q=q, **point)
                run.check_estimate('Xi transform', row, laplace_xi(spec, q), q=q, **point)


# ========================================
# quenched-bm
# ========================================

def _quenched_task(task: Task) -> Tuple[np.ndarray, np.ndarray]:
    payload = task.payload
    env = payload['env']
    batch = quenched_hitting_times(env, payload['v'], payload['mesh'], task.size, task.stream(),
                                   payload['backward_span'])
    return batch.log_sigma, batch.truncated


@experiment(
    'quenched-bm',
    anchor="zero potential: sigma(1) is the Brownian hitting time of 1 (P(sigma <= 1) = 0.3173)",
    defaults={'v': 1.0, 'mesh': QUENCHED_DEFAULT_MESH, 'n_samples': 10_000, 'backward_span': 1024},
    quick={'n_samples': 2_000, 'mesh': 2.0 ** -8},
    budget='< 5 min',
)
def quenched_bm(run: ExperimentRun) -> None:
    v, mesh = float(run.params['v']), float(run.params['mesh'])
    span = int(run.params['backward_span'])
    env = build_environment(StepModel.balanced(), max(span, int(math.ceil(v))), run.stream('environment'))
    tasks = run.tasks(run.params['n_samples'], 'samples', task_size=2_000, env=env, v=v, mesh=mesh,
                      backward_span=span)
    results = run.map(_quenched_task, tasks)
    log_sigma = np.concatenate([ls for ls, _ in results])
    truncated = np.concatenate([cut for _, cut in results])
    n = log_sigma.size
    n_truncated = int(truncated.sum())
    run.note('truncated_I2', n_truncated)
    if n_truncated:
        run.warn('TruncatedI2', f"{n_truncated}/{n} samples unabsorbed; partial values used as lower bounds")

    # a truncated sample is only known to exceed its partial value
    known_above = truncated & (log_sigma > 0.0)
    usable = ~truncated | known_above
    hits = int(((log_sigma <= 0.0) & ~truncated).sum())
    estimate = McEstimate.from_proportion(hits, int(usable.sum()), run.seed,
                                          {'mesh': mesh, 'excluded': int((~usable).sum())})
    exact = math.erfc(v / math.sqrt(2.0))
    row = run.add_estimate('P(sigma <= 1)', estimate, v=v, mesh=mesh)
    run.check_estimate('P(sigma <= 1) = 2(1 - Phi(v))', row, exact)

    median_target = (v / norm.ppf(0.75)) ** 2
    median, low, high = quantile_ci(np.exp(log_sigma), 0.5, confidence=0.997)
    row = run.add_value('median sigma', median, n=n, v=v, mesh=mesh)
    run.check('median sigma in order-statistic band', bool(low <= median_target <= high),
              '99.7% order-statistic interval', median, median_target,
              min(median_target - low, high - median_target), row, v=v)


# ========================================
# surrogate-convergence
# ========================================

def _surrogate_task(task: Task) -> Tuple[np.ndarray, int, bool]:
    """Normalized gaps |log sigma - surrogate| / a(v) of one environment"""
    payload = task.payload
    model, v = payload['model'], payload['v']
    rng = task.stream()
    env = build_environment(model, payload['half_length'], rng)
    try:
        surrogate = surrogate_log_sigma(env, v)
    except NotAttained:
        return np.zeros(0), 0, True
    batch = quenched_hitting_times(env, v, payload['mesh'], task.size, rng, payload['half_length'])
    kept = ~batch.truncated
    gaps = np.abs(batch.log_sigma[kept] - surrogate) / model.nf.a(v)
    return gaps, batch.n_truncated, False


@experiment(
    'surrogate-convergence',
    anchor="|log sigma(v) - (V^#_v v U~(max V))| / a(v) shrinks as v grows",
    defaults={'vs': [64, 256, 1024, 4096], 'n_envs': 100, 'samples_per_env': 20, 'mesh': 1.0,
              'backward_factor': 8},
    quick={'vs': [64, 256, 1024], 'n_envs': 40},
    budget='< 10 min',
)
def surrogate_convergence(run: ExperimentRun) -> None:
    model = StepModel.exact_stable(StableLaw.gaussian())
    medians = []
    for v in run.params['vs']:
        v = int(v)
        half_length = int(run.params['backward_factor']) * v
        tasks = [Task(run.seed, (run.spec.name, v, env_index), int(run.params['samples_per_env']),
                      {'model': model, 'v': float(v), 'mesh': float(run.params['mesh']), 'half_length': half_length})
                 for env_index in range(int(run.params['n_envs']))]
        results = run.map(_surrogate_task, tasks)
        gaps = np.concatenate([g for g, _, _ in results])
        truncated = sum(t for _, t, _ in results)
        not_attained = sum(1 for _, _, missing in results if missing)
        if truncated:
            run.warn('TruncatedI2', f"{truncated} samples excluded", v=v)
        if not_attained:
            run.warn('NotAttained', f"{not_attained} environments without backward passage", v=v)
        if gaps.size == 0:
            run.check('surrogate gap computed', False, 'samples > 0', 0, None, v=v)
            return
        median = float(np.median(gaps))
        run.add_value('median normalized gap', median, n=int(gaps.size), v=v,
                      truncated=truncated, not_attained=not_attained)
        medians.append((v, median))

    decreasing = all(b[1] < a[1] for a, b in zip(medians, medians[1:]))
    run.check('gap strictly decreasing in v', decreasing, 'strict', [m for _, m in medians], None)


# ========================================
# rwre-limit-law
# ========================================

def _profile_task(task: Task):
    payload = task.payload
    return annealed_sup_profile(payload['model'], payload['checkpoints'], task.size, task.stream(),
                                span=payload['span'], batch_size=task.size)


def _xi_cdf(t_grid, order: int) -> Tuple[List[float], List[Optional[float]]]:
    """Stehfest CDF of Xi at alpha = 2, skipping unstable points"""
    spec = LimitLawSpec(2.0, Spectral.NO_POSITIVE_JUMPS)
    times, values = [], []
    for t in t_grid:
        try:
            values.append(invert_laplace_cdf(lambda s: laplace_xi(spec, s), [float(t)], order)[0])
            times.append(float(t))
        except InversionUnstable as exc:
            logger.warning(f"⚠️  CDF point t={t:.4g} skipped: {exc}")
    return times, values


@experiment(
    'rwre-limit-law',
    anchor="Sinai walk: sup_{k<=n} Z_k / (log n)^2 against the law of Xi",
    defaults={'log_odds_variance': 2.0, 'checkpoints': [100_000, 1_000_000], 'n_walks': 10_000,
              'batch_size': 2048, 'span_factor': 8.0, 'cdf_range': [0.01, 5.0], 'cdf_points': 60,
              'stehfest_order': 14, 'ks_tolerance': 0.1, 'median_tolerance': 0.2, 'half_ks_tolerance': 0.05},
    quick={'checkpoints': [10_000, 100_000], 'n_walks': 2_000, 'batch_size': 1_000, 'half_ks_tolerance': 0.1},
    budget='< 10 min',
)
def rwre_limit_law(run: ExperimentRun) -> None:
    model = StepModel.sinai_symmetric(float(run.params['log_odds_variance']))
    checkpoints = sorted(int(n) for n in run.params['checkpoints'])
    span = int(math.ceil(float(run.params['span_factor']) * model.nf.a_inv(math.log(checkpoints[-1]))))
    tasks = run.tasks(run.params['n_walks'], 'walks', task_size=int(run.params['batch_size']),
                      model=model, checkpoints=checkpoints, span=span)
    profile = merge_profiles(run.map(_profile_task, tasks))
    run.note('span', span)
    run.note('span_doublings', list(profile.span_doublings))
    run.note('clock', 'discrete chain; the diffusion time change is not simulated (log-scale normalization)')
    if any(profile.span_doublings):
        run.warn('SpanDoubled', f"span doubled in {sum(1 for d in profile.span_doublings if d)} batches")

    lo, hi = (float(v) for v in run.params['cdf_range'])
    t_grid = np.geomspace(lo, hi, int(run.params['cdf_points']))
    times, cdf = _xi_cdf(t_grid, int(run.params['stehfest_order']))
    run.note('cdf_points_used', len(times))

    medians = []
    for n in checkpoints:
        sample = normalized_sample(model, profile, n)
        values = np.sort(sample.values)
        m = values.size
        empirical = np.searchsorted(values, times, side='right') / m
        ks = float(np.max(np.abs(empirical - np.asarray(cdf)))) if times else math.nan
        row = run.add_value('KS distance to Xi', ks, n=m, n_steps=n)
        tolerance = float(run.params['ks_tolerance'])
        run.check('KS distance', bool(ks <= tolerance), f"<= {tolerance:g}", ks, 0.0, tolerance - ks, row,
                  n_steps=n)

        median = float(np.median(values))
        medians.append(median)
        row = run.add_value('median', median, n=m, n_steps=n)
        run.check('median in [0.05, 5]', 0.05 <= median <= 5.0, '[0.05, 5]', median, None, row=row, n_steps=n)
        positive = float((sample.sups > 0).mean())
        row = run.add_value('positive fraction', positive, n=m, n_steps=n)
        run.check_bound('positive fraction', positive, 0.99, upper=False, row=row, n_steps=n)

    change = abs(medians[-1] - medians[0]) / medians[0] if medians[0] > 0 else math.inf
    tolerance = float(run.params['median_tolerance'])
    run.check('median stable across n', change <= tolerance, f"rel <= {tolerance:g}", change, 0.0,
              tolerance - change)

    # independent halves of the largest-n sample
    last = normalized_sample(model, profile, checkpoints[-1]).values
    half = last.size // 2
    result = ks_2samp(last[:half], last[half:])
    row = run.add_value('half-sample KS', float(result.statistic), n=int(last.size), n_steps=checkpoints[-1])
    run.add_value('half-sample KS p-value', float(result.pvalue), n=int(last.size), n_steps=checkpoints[-1])
    tolerance = float(run.params['half_ks_tolerance'])
    run.check_bound('half-sample KS', float(result.statistic), tolerance, row=row, n_steps=checkpoints[-1])


# ========================================
# envelope-table
# ========================================

@experiment(
    'envelope-table',
    anchor="quantiles of sup Z (loglog n)^beta / a_inv(log n) along a doubling n-grid",
    defaults={'log_odds_variance': 2.0, 'n_start': 1024, 'doublings': 8, 'n_walks': 2_000,
              'betas': [0.0, 0.5, 1.0, 2.0], 'levels': [0.1, 0.25, 0.5, 0.75, 0.9], 'task_size': 1_000,
              'median_tolerance': 0.2},
    quick={'doublings': 5, 'n_walks': 1_000, 'median_tolerance': 0.3},
    budget='< 5 min',
    acceptance=False,
)
def envelope_table_experiment(run: ExperimentRun) -> None:
    model = StepModel.sinai_symmetric(float(run.params['log_odds_variance']))
    n_grid = [int(run.params['n_start']) * 2 ** k for k in range(int(run.params['doublings']))]
    betas = [float(b) for b in run.params['betas']]
    levels = [float(level) for level in run.params['levels']]
    span = int(math.ceil(8.0 * model.nf.a_inv(math.log(n_grid[-1]))))
    tasks = run.tasks(run.params['n_walks'], 'walks', task_size=int(run.params['task_size']),
                      model=model, checkpoints=n_grid, span=span)
    profile = merge_profiles(run.map(_profile_task, tasks))
    rows = envelope_table(model, profile, betas, levels)

    run.check('row count', len(rows) == len(n_grid) * len(betas), 'exact', len(rows), len(n_grid) * len(betas))
    ordered = True
    medians: Dict[int, float] = {}
    for row in rows:
        for level, value, low, high in zip(row.levels, row.quantiles, row.ci_low, row.ci_high):
            stat = run.add_value('quantile', value, n=profile.n_walks, n_steps=row.n, beta=row.beta, level=level)
            stat.meta.update({'ci_low': low, 'ci_high': high})
        ordered &= all(b >= a for a, b in zip(row.quantiles, row.quantiles[1:]))
        if row.beta == 0.0:
            medians[row.n] = row.quantiles[row.levels.index(0.5)]
            for level, value in zip(row.levels, row.lll_quantiles):
                run.add_value('logloglog quantile', value, n=profile.n_walks, n_steps=row.n, level=level)
    run.check('quantiles nondecreasing in level', ordered, 'exact')
    positive = all(m > 0 for m in medians.values())
    run.check('median positive', positive, '> 0', min(medians.values()), 0.0)

    last, previous = medians[n_grid[-1]], medians[n_grid[-2]]
    change = abs(last - previous) / previous if previous > 0 else math.inf
    tolerance = float(run.params['median_tolerance'])
    run.check('beta = 0 median settles', change <= tolerance, f"rel <= {tolerance:g}", change, 0.0,
              tolerance - change)
