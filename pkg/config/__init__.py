"""
Configuration module for the sinai-lab toolkit
"""

from .settings import (
    TOOL_VERSION,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    DEFAULT_OUT_DIR,
    LOG_DIR,
    LOG_RETENTION_DAYS,
    # Mittag-Leffler numerics
    MLF_DEFAULT_PRECISION,
    MLF_MIN_PRECISION,
    MLF_MAX_PRECISION,
    MLF_MAX_TERMS,
    MLF_CANCELLATION_LIMIT,
    MLF_MAX_DPS,
    ROOT_SCAN_STEP,
    ROOT_SCAN_WINDOW,
    ROOT_TOLERANCE,
    # Laplace inversion
    STEHFEST_DEFAULT_ORDER,
    STEHFEST_MAX_ORDER,
    STEHFEST_STABILITY_TOL,
    # Monte Carlo
    MC_TASK_SIZE,
    RANGE_DECAY_MIN_SURVIVORS,
    RENEWAL_MAX_STEPS,
    EXIT_MAX_STEPS,
    STEP_CHUNK,
    MC_CELL_BUDGET,
    XI_DEFAULT_MESH,
    XI_HORIZON_CAP_STEPS,
    XI_FAILURE_BUDGET,
    GRID_MONITOR_BETA,
    # Quenched diffusion
    QUENCHED_DEFAULT_MESH,
    QUENCHED_BACKWARD_SPAN,
    # RWRE
    RWRE_SPAN_FACTOR,
    RWRE_MAX_SPAN_DOUBLINGS,
    RWRE_BATCH_SIZE,
    VERDICT_SIGMAS
)

__all__ = [
    'TOOL_VERSION',
    'DEFAULT_SEED',
    'DEFAULT_WORKERS',
    'DEFAULT_OUT_DIR',
    'LOG_DIR',
    'LOG_RETENTION_DAYS',
    # Mittag-Leffler numerics
    'MLF_DEFAULT_PRECISION',
    'MLF_MIN_PRECISION',
    'MLF_MAX_PRECISION',
    'MLF_MAX_TERMS',
    'MLF_CANCELLATION_LIMIT',
    'MLF_MAX_DPS',
    'ROOT_SCAN_STEP',
    'ROOT_SCAN_WINDOW',
    'ROOT_TOLERANCE',
    # Laplace inversion
    'STEHFEST_DEFAULT_ORDER',
    'STEHFEST_MAX_ORDER',
    'STEHFEST_STABILITY_TOL',
    # Monte Carlo
    'MC_TASK_SIZE',
    'RANGE_DECAY_MIN_SURVIVORS',
    'RENEWAL_MAX_STEPS',
    'EXIT_MAX_STEPS',
    'STEP_CHUNK',
    'MC_CELL_BUDGET',
    'XI_DEFAULT_MESH',
    'XI_HORIZON_CAP_STEPS',
    'XI_FAILURE_BUDGET',
    'GRID_MONITOR_BETA',
    # Quenched diffusion
    'QUENCHED_DEFAULT_MESH',
    'QUENCHED_BACKWARD_SPAN',
    # RWRE
    'RWRE_SPAN_FACTOR',
    'RWRE_MAX_SPAN_DOUBLINGS',
    'RWRE_BATCH_SIZE',
    'VERDICT_SIGMAS'
]
