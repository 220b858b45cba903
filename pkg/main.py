#!/usr/bin/env python3
"""
sinai-lab - Main Entry Point
Runs the registered numerical experiments (single runs, the registry listing
and the acceptance suite) and writes record.json / data.csv per experiment
"""

import sys
import argparse
import logging
from datetime import datetime
from pathlib import Path

from config import DEFAULT_SEED, DEFAULT_WORKERS, LOG_DIR, LOG_RETENTION_DAYS, TOOL_VERSION
from utils.errors import ConfigError
from workflows import EXPERIMENTS, ExperimentConfig, acceptance_suite, get_experiment, run_acceptance_suite, run_experiment

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


# Setup logging
def setup_logging():
    """Setup logging to both file and console"""
    log_dir = Path(__file__).parent / LOG_DIR
    log_dir.mkdir(parents=True, exist_ok=True)

    log_file = log_dir / f"sinai_lab_{datetime.now().strftime('%Y-%m-%d')}.log"

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file, encoding='utf-8'),
            logging.StreamHandler(sys.stdout)
        ]
    )

    return logging.getLogger(__name__)


def cleanup_old_logs(days=LOG_RETENTION_DAYS):
    """Delete logs older than specified days"""
    log_dir = Path(__file__).parent / LOG_DIR
    if not log_dir.exists():
        return

    cutoff = datetime.now().timestamp() - (days * 24 * 60 * 60)

    for log_file in log_dir.glob("*.log"):
        if log_file.stat().st_mtime < cutoff:
            log_file.unlink()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='sinai-lab',
        description='Numerical experiments for stable random environments, the diffusion in them and the Sinai walk',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # List the registered experiments
  python main.py list

  # Run one experiment with its default parameters
  python main.py run --experiment exit-gambler --seed 7 --workers 4

  # Run from a config file (TOML or JSON) into a chosen directory
  python main.py run --config configs/ksharp.toml --out results/ksharp

  # Run the acceptance suite at reduced sample sizes
  python main.py check --quick
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run one experiment')
    run.add_argument('--experiment', help='Registered experiment name (overrides the config name)')
    run.add_argument('--config', type=Path, help='Config file (.toml or .json)')
    run.add_argument('--seed', type=int, default=None, help=f'Master seed (default {DEFAULT_SEED})')
    run.add_argument('--workers', type=int, default=None, help=f'Worker processes (default {DEFAULT_WORKERS})')
    run.add_argument('--out', type=Path, default=None, help='Output directory (default results/<name>)')
    run.add_argument('--quick', action='store_true', help='Reduced sample sizes (same tolerances)')

    sub.add_parser('list', help='List registered experiments')

    check = sub.add_parser('check', help='Run the acceptance suite')
    check.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Master seed')
    check.add_argument('--workers', type=int, default=DEFAULT_WORKERS, help='Worker processes')
    check.add_argument('--out', type=Path, default=None, help='Output root (default results/check)')
    check.add_argument('--quick', action='store_true', help='Reduced sample sizes (same tolerances)')
    check.add_argument('--only', nargs='+', default=None, metavar='NAME', help='Subset of experiments')
    return parser


def resolve_run_config(args) -> ExperimentConfig:
    """Merge the config file (if any) with the command-line overrides"""
    if args.config is not None:
        base = ExperimentConfig.from_file(args.config)
    elif args.experiment:
        base = ExperimentConfig(args.experiment)
    else:
        raise ConfigError("run needs --experiment or --config")
    return ExperimentConfig(
        name=args.experiment or base.name,
        params=base.params,
        seed=base.seed if args.seed is None else args.seed,
        workers=base.workers if args.workers is None else args.workers,
        out_path=base.out_path if args.out is None else args.out,
    )


def list_experiments() -> int:
    suite = set(acceptance_suite())
    print(f"{'experiment':<24}{'budget':<12}{'suite':<7}anchor")
    for name, spec in sorted(EXPERIMENTS.items()):
        print(f"{name:<24}{spec.budget:<12}{'yes' if name in suite else 'no':<7}{spec.anchor}")
    return EXIT_OK


def main(argv=None):
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'list':
        return list_experiments()

    logger = setup_logging()
    logger.info("=" * 80)
    logger.info(f"🚀 sinai-lab {TOOL_VERSION} started: {args.command}")
    logger.info("=" * 80)

    try:
        if args.command == 'run':
            config = resolve_run_config(args)
            get_experiment(config.name)
            record = run_experiment(config, quick=args.quick)
            passed = record.passed
        else:
            names = args.only
            if names is not None:
                for name in names:
                    get_experiment(name)
            records = run_acceptance_suite(args.seed, max(1, args.workers), args.out, args.quick, names)
            for name, record in records.items():
                marker = "✅" if record.passed else "❌"
                logger.info(f"   {marker} {name}")
            passed = all(record.passed for record in records.values())

    except ConfigError as e:
        logger.error(f"❌ Usage error: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception("❌ Unexpected error occurred:")
        logger.error("=" * 80)
        logger.error(f"Error: {str(e)}")
        logger.error("=" * 80)
        return EXIT_FAILED

    if passed:
        logger.info("=" * 80)
        logger.info("✅ All verdicts passed")
        logger.info("=" * 80)
        cleanup_old_logs()
        return EXIT_OK

    logger.error("=" * 80)
    logger.error("❌ Some verdicts failed (records written)")
    logger.error("=" * 80)
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
