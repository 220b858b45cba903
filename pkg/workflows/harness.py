"""
Experiment harness: configuration, registry, parallel execution and result records

Every acceptance check of the toolkit is a named experiment. An experiment is
a function taking an `ExperimentRun`, which hands out keyed random streams,
runs task lists in parallel, and collects statistics and verdicts into a
`ResultRecord` that is written as record.json plus a long-form data.csv.
"""

import json
import logging
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from config import DEFAULT_OUT_DIR, DEFAULT_SEED, DEFAULT_WORKERS, MC_TASK_SIZE, TOOL_VERSION, VERDICT_SIGMAS
from utils.errors import ConfigError, SinaiLabError
from utils.estimates import McEstimate
from utils.persistence import write_outputs
from utils.random_streams import MASK64, RandomStream, StreamKey, derive_stream, task_sizes

logger = logging.getLogger(__name__)


# ========================================
# Configuration
# ========================================

CONFIG_KEYS = ('name', 'params', 'seed', 'workers', 'out_path')


@dataclass
class ExperimentConfig:
    """
    One experiment invocation

    `params` overrides the experiment's declared defaults key by key; keys an
    experiment does not declare are rejected when the run starts.
    """
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    out_path: Optional[Path] = None

    def __post_init__(self):
        self.seed = int(self.seed) & MASK64
        self.workers = max(1, int(self.workers))
        if self.out_path is not None:
            self.out_path = Path(self.out_path)

    @property
    def out_dir(self) -> Path:
        return self.out_path if self.out_path is not None else Path(DEFAULT_OUT_DIR) / self.name

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)} (allowed: {', '.join(CONFIG_KEYS)})")
        if 'name' not in data:
            raise ConfigError("config must name an experiment")
        params = data.get('params', {})
        if not isinstance(params, dict):
            raise ConfigError(f"params must be a table, got {type(params).__name__}")
        return cls(
            name=str(data['name']),
            params=dict(params),
            seed=data.get('seed', DEFAULT_SEED),
            workers=data.get('workers', DEFAULT_WORKERS),
            out_path=data.get('out_path'),
        )

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        """Load a TOML (.toml) or JSON (.json) config file"""
        path = Path(path)
        try:
            if path.suffix.lower() == '.toml':
                with path.open('rb') as f:
                    data = tomllib.load(f)
            elif path.suffix.lower() == '.json':
                with path.open('r', encoding='utf-8') as f:
                    data = json.load(f)
            else:
                raise ConfigError(f"config file must be .toml or .json, got {path.name}")
        except (OSError, tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a table at top level")
        return cls.from_mapping(data)

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'params': dict(self.params), 'seed': self.seed,
                'workers': self.workers, 'out_path': str(self.out_dir)}


# ========================================
# Result record
# ========================================

class VerdictStatus(str, Enum):
    PASS = 'pass'
    FAIL = 'fail'
    NA = 'NA'


@dataclass(frozen=True)
class Verdict:
    """Outcome of one acceptance check; `margin` > 0 means inside the tolerance"""
    check: str
    status: VerdictStatus
    tolerance: str
    value: Any = None
    target: Any = None
    margin: Optional[float] = None
    point: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'check': self.check, 'status': self.status.value, 'tolerance': self.tolerance,
                'value': self.value, 'target': self.target, 'margin': self.margin, 'point': dict(self.point)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Verdict":
        return cls(data['check'], VerdictStatus(data['status']), data['tolerance'], data.get('value'),
                   data.get('target'), data.get('margin'), dict(data.get('point', {})))


@dataclass
class Statistic:
    """One long-form result row: a statistic at a parameter point"""
    stat: str
    value: Any
    se: Optional[float] = None
    n: Optional[int] = None
    seed: Optional[int] = None
    point: Dict[str, Any] = field(default_factory=dict)
    verdict: Optional[str] = None
    tolerance: Optional[str] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'stat': self.stat, 'value': self.value, 'se': self.se, 'n': self.n, 'seed': self.seed,
                'point': dict(self.point), 'verdict': self.verdict, 'tolerance': self.tolerance,
                'meta': dict(self.meta)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Statistic":
        return cls(data['stat'], data.get('value'), data.get('se'), data.get('n'), data.get('seed'),
                   dict(data.get('point', {})), data.get('verdict'), data.get('tolerance'),
                   dict(data.get('meta', {})))


@dataclass
class ResultRecord:
    experiment: str
    params: Dict[str, Any]
    seed: int
    statistics: List[Statistic] = field(default_factory=list)
    verdicts: List[Verdict] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(verdict.status != VerdictStatus.FAIL for verdict in self.verdicts)

    def failures(self) -> List[Verdict]:
        return [verdict for verdict in self.verdicts if verdict.status == VerdictStatus.FAIL]

    def numerics(self) -> Dict[str, Any]:
        """Everything that must be identical across worker counts for a fixed seed"""
        return {'statistics': [s.to_dict() for s in self.statistics],
                'verdicts': [v.to_dict() for v in self.verdicts]}

    def to_dict(self) -> Dict[str, Any]:
        return {'experiment': self.experiment, 'params': dict(self.params), 'seed': self.seed,
                'passed': self.passed, **self.numerics(), 'provenance': dict(self.provenance)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResultRecord":
        return cls(data['experiment'], dict(data.get('params', {})), int(data['seed']),
                   [Statistic.from_dict(s) for s in data.get('statistics', [])],
                   [Verdict.from_dict(v) for v in data.get('verdicts', [])],
                   dict(data.get('provenance', {})))

    def csv_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for statistic in self.statistics:
            row = {key: _csv_param(value) for key, value in statistic.point.items()}
            row.update({'experiment': self.experiment, 'stat': statistic.stat, 'value': statistic.value,
                        'se': statistic.se, 'n': statistic.n, 'seed': statistic.seed,
                        'verdict': statistic.verdict or '', 'tolerance': statistic.tolerance or ''})
            rows.append(row)
        return rows


def _csv_param(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return ';'.join(str(v) for v in value)
    return value


# ========================================
# Error logger
# ========================================

class ExperimentErrorLogger:
    """Errors and warnings of one experiment run, summarized into the record provenance"""

    def __init__(self, experiment: str):
        self.experiment = experiment
        self.errors: List[Dict] = []
        self.warnings: List[Dict] = []

    def log_error(self, context: Dict, error_type: str, message: str, exception: Optional[Exception] = None):
        """Log an error with context"""
        error_entry = {
            'timestamp': datetime.now().isoformat(timespec='seconds'),
            'experiment': self.experiment,
            'context': dict(context),
            'error_type': error_type,
            'message': message,
            'exception': repr(exception) if exception else None
        }
        self.errors.append(error_entry)
        logger.error(f"❌ ERROR [{error_type}]: {self.experiment} {context or ''} - {message}")

    def log_warning(self, context: Dict, warning_type: str, message: str):
        """Log a warning with context"""
        warning_entry = {
            'timestamp': datetime.now().isoformat(timespec='seconds'),
            'experiment': self.experiment,
            'context': dict(context),
            'warning_type': warning_type,
            'message': message
        }
        self.warnings.append(warning_entry)
        logger.warning(f"⚠️  WARNING [{warning_type}]: {self.experiment} {context or ''} - {message}")

    def get_summary(self) -> Dict:
        return {
            'total_errors': len(self.errors),
            'total_warnings': len(self.warnings),
            'errors_by_type': self._group_by_type(self.errors, 'error_type'),
            'warnings_by_type': self._group_by_type(self.warnings, 'warning_type'),
            'errors': list(self.errors),
            'warnings': list(self.warnings)
        }

    def _group_by_type(self, entries: List[Dict], key: str) -> Dict:
        grouped = {}
        for entry in entries:
            entry_type = entry.get(key, 'Unknown')
            grouped[entry_type] = grouped.get(entry_type, 0) + 1
        return grouped

    def print_summary(self):
        summary = self.get_summary()
        if not summary['total_errors'] and not summary['total_warnings']:
            return
        logger.info("=" * 80)
        logger.info(f"📊 ERROR SUMMARY: {self.experiment}")
        logger.info(f"   ❌ Total Errors: {summary['total_errors']}")
        logger.info(f"   ⚠️  Total Warnings: {summary['total_warnings']}")
        for error_type, count in summary['errors_by_type'].items():
            logger.info(f"      • {error_type}: {count}")
        for warning_type, count in summary['warnings_by_type'].items():
            logger.info(f"      • {warning_type}: {count}")
        logger.info("=" * 80)


# ========================================
# Parallel map
# ========================================

def parallel_map(func: Callable, tasks: Sequence, workers: int = 1) -> List:
    """
    Order-preserving map of a top-level function over a fixed task list

    Runs inline for one worker; results never depend on the worker count
    because every task derives its own stream from its key.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


@dataclass(frozen=True)
class Task:
    """Picklable unit of work: stream key path, sample count and payload"""
    seed: int
    keys: Tuple[StreamKey, ...]
    size: int
    payload: Dict[str, Any] = field(default_factory=dict)

    def stream(self) -> RandomStream:
        return derive_stream(self.seed, *self.keys)


# ========================================
# Registry
# ========================================

@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    anchor: str
    func: Callable[["ExperimentRun"], None]
    defaults: Dict[str, Any]
    quick: Dict[str, Any]
    budget: str
    acceptance: bool


EXPERIMENTS: Dict[str, ExperimentSpec] = {}


def experiment(name: str, anchor: str, defaults: Optional[Dict[str, Any]] = None,
               quick: Optional[Dict[str, Any]] = None, budget: str = '< 1 min', acceptance: bool = True):
    """
    Register an experiment under `name`

    Args:
        name: CLI id
        anchor: one-line description shown by `list`
        defaults: every parameter the experiment accepts, with its desk-scale value
        quick: overrides used by `check --quick`
        budget: declared runtime at default parameters
        acceptance: part of the `check` suite
    """
    def decorator(func):
        if name in EXPERIMENTS:
            raise ValueError(f"experiment {name!r} registered twice")
        EXPERIMENTS[name] = ExperimentSpec(name, anchor, func, dict(defaults or {}), dict(quick or {}),
                                           budget, acceptance)
        return func
    return decorator


def get_experiment(name: str) -> ExperimentSpec:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; run `list` to see the registry")
    return EXPERIMENTS[name]


def resolve_params(spec: ExperimentSpec, overrides: Dict[str, Any], quick: bool = False) -> Dict[str, Any]:
    unknown = sorted(set(overrides) - set(spec.defaults))
    if unknown:
        raise ConfigError(f"{spec.name}: unknown params {', '.join(unknown)} "
                          f"(accepted: {', '.join(sorted(spec.defaults))})")
    params = dict(spec.defaults)
    if quick:
        params.update(spec.quick)
    params.update(overrides)
    return params


# ========================================
# Experiment run
# ========================================

class ExperimentRun:
    """Context handed to an experiment function"""

    def __init__(self, spec: ExperimentSpec, config: ExperimentConfig, quick: bool = False):
        self.spec = spec
        self.config = config
        self.params = resolve_params(spec, config.params, quick)
        self.quick = quick
        self.seed = config.seed
        self.workers = config.workers
        self.errors = ExperimentErrorLogger(spec.name)
        self.statistics: List[Statistic] = []
        self.verdicts: List[Verdict] = []
        self.provenance: Dict[str, Any] = {}

    # ----- randomness and parallelism -----------------------------------

    def stream(self, *keys: StreamKey) -> RandomStream:
        """Stream keyed by (seed, experiment, *keys)"""
        return derive_stream(self.seed, self.spec.name, *keys)

    def tasks(self, total: int, *keys: StreamKey, task_size: int = MC_TASK_SIZE, **payload) -> List[Task]:
        """Fixed split of `total` samples into keyed tasks"""
        return [Task(self.seed, (self.spec.name, *keys, index), size, dict(payload))
                for index, size in enumerate(task_sizes(int(total), int(task_size)))]

    def map(self, func: Callable, tasks: Sequence) -> List:
        return parallel_map(func, tasks, self.workers)

    # ----- results -------------------------------------------------------

    def add_estimate(self, stat: str, estimate: McEstimate, **point) -> Statistic:
        row = Statistic(stat, estimate.mean, estimate.std_error, estimate.n, estimate.seed, point,
                        meta=dict(estimate.meta))
        self.statistics.append(row)
        return row

    def add_value(self, stat: str, value: Any, n: Optional[int] = None, **point) -> Statistic:
        row = Statistic(stat, value, None, n, self.seed if n is not None else None, point)
        self.statistics.append(row)
        return row

    def check(self, check: str, passed: Optional[bool], tolerance: str, value: Any = None, target: Any = None,
              margin: Optional[float] = None, row: Optional[Statistic] = None, **point) -> Verdict:
        """Record a verdict; `passed=None` records NA"""
        status = (VerdictStatus.NA if passed is None
                  else VerdictStatus.PASS if passed else VerdictStatus.FAIL)
        verdict = Verdict(check, status, tolerance, value, target, margin, point)
        self.verdicts.append(verdict)
        if row is not None:
            row.verdict, row.tolerance = status.value, tolerance
        marker = {'pass': '✅', 'fail': '❌', 'NA': '⏭️ '}[status.value]
        logger.info(f"   {marker} {check} {point or ''}: value={_fmt(value)} target={_fmt(target)} ({tolerance})")
        return verdict

    def check_estimate(self, check: str, row: Statistic, target: float, sigmas: float = VERDICT_SIGMAS,
                       floor: float = 0.0, **point) -> Verdict:
        """|mean - target| <= sigmas * se (+ floor)"""
        band = sigmas * row.se + floor
        gap = abs(row.value - target)
        tolerance = f"{sigmas:g}*se" + (f" + {floor:g}" if floor else '')
        return self.check(check, bool(gap <= band), tolerance, row.value, target, band - gap, row,
                          **(point or row.point))

    def check_close(self, check: str, value: float, target: float, tol: float,
                    row: Optional[Statistic] = None, **point) -> Verdict:
        """|value - target| < tol"""
        gap = abs(value - target)
        return self.check(check, bool(gap < tol), f"abs < {tol:g}", value, target, tol - gap, row, **point)

    def check_bound(self, check: str, value: float, bound: float, upper: bool = True,
                    row: Optional[Statistic] = None, **point) -> Verdict:
        """value <= bound (upper) or value >= bound (lower)"""
        margin = bound - value if upper else value - bound
        tolerance = f"<= {bound:g}" if upper else f">= {bound:g}"
        return self.check(check, bool(margin >= 0), tolerance, value, bound, margin, row, **point)

    def note(self, key: str, value: Any) -> None:
        self.provenance[key] = value

    def warn(self, warning_type: str, message: str, **context) -> None:
        self.errors.log_warning(context, warning_type, message)

    def record(self) -> ResultRecord:
        provenance = {
            'tool_version': TOOL_VERSION,
            'workers': self.workers,
            'quick': self.quick,
            'budget': self.spec.budget,
            'anchor': self.spec.anchor,
            **self.provenance,
            'error_summary': self.errors.get_summary(),
        }
        return ResultRecord(self.spec.name, dict(self.params), self.seed, list(self.statistics),
                            list(self.verdicts), provenance)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}" if math.isfinite(value) else str(value)
    return str(value)


# ========================================
# Entry points
# ========================================

def run_experiment(config: ExperimentConfig, quick: bool = False, write: bool = True) -> ResultRecord:
    """
    Run one registered experiment and write its record

    Raises:
        ConfigError: unknown experiment or parameter (nothing is written)
    """
    spec = get_experiment(config.name)
    run = ExperimentRun(spec, config, quick)

    logger.info("=" * 80)
    logger.info(f"🚀 Experiment {spec.name}: {spec.anchor}")
    logger.info(f"   seed={run.seed} workers={run.workers} quick={quick} budget={spec.budget}")
    logger.info("=" * 80)
    started = datetime.now()
    try:
        spec.func(run)
    except SinaiLabError as exc:
        run.errors.log_error({}, type(exc).__name__, str(exc), exc)
        run.check('completed', False, 'no toolkit error', type(exc).__name__, None)
    run.note('elapsed_seconds', round((datetime.now() - started).total_seconds(), 3))
    run.errors.print_summary()

    record = run.record()
    if write:
        write_outputs(config.out_dir, record.to_dict(), record.csv_rows())
    status = "✅ PASSED" if record.passed else f"❌ FAILED ({len(record.failures())} checks)"
    logger.info(f"{status}: {spec.name}")
    logger.info("=" * 80)
    return record


def acceptance_suite() -> List[str]:
    return [name for name, spec in EXPERIMENTS.items() if spec.acceptance]


def run_acceptance_suite(seed: int = DEFAULT_SEED, workers: int = DEFAULT_WORKERS,
                         out_root: Optional[Path] = None, quick: bool = False,
                         names: Optional[Iterable[str]] = None) -> Dict[str, ResultRecord]:
    """Run every acceptance experiment (or `names`) into out_root/<name>"""
    out_root = Path(out_root) if out_root is not None else Path(DEFAULT_OUT_DIR) / 'check'
    records = {}
    for name in (list(names) if names is not None else acceptance_suite()):
        config = ExperimentConfig(name, {}, seed, workers, out_root / name)
        records[name] = run_experiment(config, quick=quick)
    passed = sum(1 for record in records.values() if record.passed)
    logger.info(f"📊 Acceptance suite: {passed}/{len(records)} experiments passed")
    return records
