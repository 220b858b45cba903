"""
Utility functions module
"""

from .errors import (
    SinaiLabError,
    InvalidLaw,
    UnsupportedParameterization,
    DomainError,
    RangeError,
    NotAttained,
    Undecided,
    PartialLadder,
    PrecisionError,
    RootNotFound,
    InversionUnstable,
    TruncatedI2,
    HorizonExceeded,
    ConfigError
)
from .estimates import McEstimate, moments, pooled_proportion
from .random_streams import RandomStream, derive_stream, spawn_streams, stream_seed, task_sizes
from .persistence import read_csv, read_json, write_csv, write_json, write_outputs

__all__ = [
    'SinaiLabError',
    'InvalidLaw',
    'UnsupportedParameterization',
    'DomainError',
    'RangeError',
    'NotAttained',
    'Undecided',
    'PartialLadder',
    'PrecisionError',
    'RootNotFound',
    'InversionUnstable',
    'TruncatedI2',
    'HorizonExceeded',
    'ConfigError',
    'McEstimate',
    'moments',
    'pooled_proportion',
    'RandomStream',
    'derive_stream',
    'spawn_streams',
    'stream_seed',
    'task_sizes',
    'read_csv',
    'read_json',
    'write_csv',
    'write_json',
    'write_outputs'
]
