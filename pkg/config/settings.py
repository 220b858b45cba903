"""
Configuration settings for the sinai-lab toolkit
Centralized configuration for seeds, worker counts, output paths and the
numerical constants shared by the engines and the experiment harness
"""

import os
from dotenv import load_dotenv

# Load environment variables (handle BOM encoding on Windows)
from pathlib import Path
env_path = Path(__file__).parent.parent / '.env'
if env_path.exists():
    load_dotenv(dotenv_path=env_path, encoding='utf-8-sig')
else:
    load_dotenv()

TOOL_VERSION = "0.4.0"

# ========================================
# Run Configuration
# ========================================
# Master seed for every experiment; `--seed` on the command line wins
DEFAULT_SEED = int(os.getenv("SINAI_LAB_SEED", "20240611"))
DEFAULT_WORKERS = int(os.getenv("SINAI_LAB_WORKERS", "1"))
DEFAULT_OUT_DIR = os.getenv("SINAI_LAB_OUT_DIR", "results")
LOG_DIR = os.getenv("SINAI_LAB_LOG_DIR", "logs/runs")
LOG_RETENTION_DAYS = 30

# ========================================
# Mittag-Leffler Numerics
# ========================================
MLF_DEFAULT_PRECISION = 1e-14
MLF_MIN_PRECISION = 1e-15
MLF_MAX_PRECISION = 1e-6
MLF_MAX_TERMS = 4000
# Switch to mpmath once max|term| / |sum| exceeds this many units
MLF_CANCELLATION_LIMIT = 1e6
MLF_MAX_DPS = 400  # extended precision ceiling (decimal digits)

# Root scan for rho1 / rho2
ROOT_SCAN_STEP = 0.01
ROOT_SCAN_WINDOW = 100.0  # scan [-100, 0]
ROOT_TOLERANCE = 1e-12

# ========================================
# Laplace Inversion (Gaver-Stehfest)
# ========================================
STEHFEST_DEFAULT_ORDER = 14
STEHFEST_MAX_ORDER = 18  # double precision ceiling
STEHFEST_STABILITY_TOL = 1e-3  # max divergence between orders N and N-2

# ========================================
# Monte Carlo Budgets
# ========================================
MC_TASK_SIZE = 10_000  # paths per task; tasks are the unit of parallelism
RANGE_DECAY_MIN_SURVIVORS = 50
RENEWAL_MAX_STEPS = 2 ** 18  # per path; longer paths are excluded and counted
EXIT_MAX_STEPS = 2 ** 20
STEP_CHUNK = 4096  # steps simulated per vectorized block
MC_CELL_BUDGET = 2 ** 22  # paths x steps held in memory per block

# Xi sampler
XI_DEFAULT_MESH = 2 ** 12
XI_HORIZON_CAP_STEPS = 2 ** 20
XI_FAILURE_BUDGET = 1e-3  # tolerated HorizonExceeded rate at alpha >= 1.2
# Discrete-monitoring shift for Gaussian grids: beta * sd * sqrt(dt), beta = -zeta(1/2) / sqrt(2 pi)
GRID_MONITOR_BETA = 0.5825971579390106

# ========================================
# Quenched Diffusion
# ========================================
QUENCHED_DEFAULT_MESH = 2.0 ** -10
QUENCHED_BACKWARD_SPAN = 256  # unit segments on the negative side

# ========================================
# RWRE
# ========================================
RWRE_SPAN_FACTOR = 4.0  # initial span 4 * sqrt(n log n)
RWRE_MAX_SPAN_DOUBLINGS = 8
RWRE_BATCH_SIZE = 1024  # walks advanced together

# ========================================
# Verdicts
# ========================================
VERDICT_SIGMAS = 3.0  # MC agreement band in standard errors
