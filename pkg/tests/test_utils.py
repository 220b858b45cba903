#!/usr/bin/env python3
"""
Unit Tests for the shared utilities
Error families, keyed random streams, Monte Carlo estimates and result persistence
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import math
import pickle

import numpy as np
import pytest

from utils import (
    ConfigError, DomainError, HorizonExceeded, InvalidLaw, InversionUnstable, McEstimate, NotAttained,
    PartialLadder, PrecisionError, RangeError, RootNotFound, SinaiLabError, TruncatedI2, Undecided,
    UnsupportedParameterization, derive_stream, moments, pooled_proportion, read_csv, read_json,
    spawn_streams, stream_seed, task_sizes, write_csv, write_json, write_outputs,
)
from utils.persistence import csv_columns


# ========================================
# Error families
# ========================================

@pytest.mark.parametrize("error_type, builtin", [
    (InvalidLaw, ValueError),
    (UnsupportedParameterization, ValueError),
    (DomainError, ValueError),
    (ConfigError, ValueError),
    (RangeError, LookupError),
    (NotAttained, LookupError),
    (Undecided, LookupError),
    (HorizonExceeded, LookupError),
    (RootNotFound, ArithmeticError),
])
def test_error_families(error_type, builtin):
    """Every toolkit error is catchable by its builtin family and by SinaiLabError"""
    assert issubclass(error_type, SinaiLabError)
    assert issubclass(error_type, builtin)


def test_errors_carry_payloads():
    """Errors with partial results expose them as attributes"""
    print("\n" + "=" * 80)
    print("🧪 TEST: error payloads")
    print("=" * 80)

    ladder = PartialLadder("only 2 of 5", partial={'T': [0, 3]}, found=2)
    assert ladder.found == 2 and ladder.partial == {'T': [0, 3]}
    assert isinstance(ladder, LookupError)

    assert InversionUnstable("diverged", 0.25).divergence == 0.25
    assert PrecisionError("too tight", achieved=1e-9).achieved == 1e-9
    assert TruncatedI2("unabsorbed", 12.5).partial == 12.5
    print("   ✅ payloads preserved")


def test_payload_errors_survive_pickling():
    """Worker processes send raised errors back to the parent by pickling"""
    for error in (PartialLadder("short", {'T': [0]}, 1), InversionUnstable("diverged", 0.5),
                  PrecisionError("tight", 1e-9), TruncatedI2("unabsorbed", 3.0)):
        restored = pickle.loads(pickle.dumps(error))
        assert type(restored) is type(error)
        assert str(restored) == str(error)
        assert restored.__dict__ == error.__dict__


# ========================================
# Random streams
# ========================================

def test_derive_stream_is_keyed():
    """Same key path gives the same draws; any key change gives different draws"""
    first = derive_stream(7, 'exit-gambler', 0).random(5)
    again = derive_stream(7, 'exit-gambler', 0).random(5)
    other_task = derive_stream(7, 'exit-gambler', 1).random(5)
    other_seed = derive_stream(8, 'exit-gambler', 0).random(5)

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other_task)
    assert not np.array_equal(first, other_seed)


def test_stream_seed_recovers_master_seed():
    assert stream_seed(derive_stream(20240611, 'x', 3)) == 20240611
    assert stream_seed(derive_stream((1 << 64) + 5)) == 5


def test_spawn_streams_matches_derive_stream():
    streams = spawn_streams(11, 3, 'renewal')
    for index, rng in enumerate(streams):
        np.testing.assert_array_equal(rng.random(3), derive_stream(11, 'renewal', index).random(3))


@pytest.mark.parametrize("total, task_size, expected", [
    (25, 10, [10, 10, 5]),
    (20, 10, [10, 10]),
    (3, 10, [3]),
])
def test_task_sizes(total, task_size, expected):
    assert task_sizes(total, task_size) == expected


def test_task_sizes_rejects_empty():
    with pytest.raises(ValueError, match="total must be >= 1"):
        task_sizes(0, 10)


# ========================================
# Monte Carlo estimates
# ========================================

def test_from_samples_and_moments_agree():
    """Pooling per-task moments reproduces the estimate of the whole sample"""
    values = derive_stream(3, 'moments').normal(1.0, 2.0, size=1000)
    whole = McEstimate.from_samples(values, seed=3)
    pooled = McEstimate.from_moments([moments(values[:400]), moments(values[400:])], seed=3)

    assert pooled.n == whole.n == 1000
    assert pooled.mean == pytest.approx(whole.mean, rel=1e-12)
    assert pooled.std_error == pytest.approx(whole.std_error, rel=1e-9)


def test_from_moments_is_order_independent():
    values = derive_stream(4, 'order').random(999)
    parts = [moments(values[i:i + 100]) for i in range(0, 999, 100)]
    forward = McEstimate.from_moments(parts, seed=4)
    backward = McEstimate.from_moments(parts[::-1], seed=4)
    assert forward.mean == backward.mean
    assert forward.std_error == backward.std_error


def test_proportion_and_pooling():
    first = McEstimate.from_proportion(30, 100, seed=1)
    second = McEstimate.from_proportion(10, 100, seed=1)
    pooled = pooled_proportion([first, second], seed=1)

    assert first.std_error == pytest.approx(math.sqrt(0.3 * 0.7 / 100))
    assert pooled.mean == pytest.approx(0.2)
    assert pooled.n == 200


def test_agrees_with_uses_band_and_floor():
    estimate = McEstimate(1.0, 0.1, 100, 0)
    assert estimate.agrees_with(1.25, sigmas=3.0)
    assert not estimate.agrees_with(1.35, sigmas=3.0)
    assert estimate.agrees_with(1.35, sigmas=3.0, floor=0.1)


def test_estimate_validation():
    with pytest.raises(ValueError, match="std_error"):
        McEstimate(0.0, -1.0, 10, 0)
    with pytest.raises(ValueError, match="n must be"):
        McEstimate(0.0, 0.0, 0, 0)


def test_estimate_json_round_trip():
    estimate = McEstimate(0.5, 0.01, 1000, 42, {'mesh': 4096})
    assert McEstimate.from_dict(estimate.to_dict()) == estimate


# ========================================
# Persistence
# ========================================

def test_csv_columns_are_long_form():
    rows = [{'experiment': 'e', 'stat': 's', 'x': 1, 'value': 0.1},
            {'experiment': 'e', 'stat': 's', 'q': 2, 'value': 0.2}]
    assert csv_columns(rows) == ['experiment', 'stat', 'q', 'x', 'value', 'se', 'n', 'seed', 'verdict',
                                 'tolerance']


def test_write_csv_and_json(tmp_path):
    """Floats survive the CSV round trip exactly; numpy types become JSON types"""
    value = 0.1 + 0.2
    write_csv(tmp_path / 'data.csv', [{'experiment': 'e', 'stat': 's', 'value': value, 'n': 3}])
    rows = read_csv(tmp_path / 'data.csv')
    assert float(rows[0]['value']) == value
    assert rows[0]['se'] == ''

    write_json(tmp_path / 'record.json', {'a': np.float64(1.5), 'b': np.arange(3), 'c': (1, 2)})
    assert read_json(tmp_path / 'record.json') == {'a': 1.5, 'b': [0, 1, 2], 'c': [1, 2]}


def test_write_outputs_layout(tmp_path):
    paths = write_outputs(tmp_path / 'run', {'experiment': 'e'}, [{'experiment': 'e', 'stat': 's', 'value': 1}])
    assert paths['record'].name == 'record.json'
    assert paths['data'].name == 'data.csv'
    assert paths['record'].exists() and paths['data'].exists()


if __name__ == "__main__":
    pytest.main([__file__])
