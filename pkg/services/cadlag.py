"""
Discretized two-sided paths

A CadlagGrid stores a path on a strictly increasing grid containing 0. The
value at a grid time t > 0 holds on [t, next grid time), the value at a
grid time t < 0 holds on (previous grid time, t]. This mirrors a path that
is right-continuous on the positive side and left-continuous on the
negative side.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from utils.errors import RangeError


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CadlagGrid:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError(f"times and values must be 1-d of equal length, got {times.shape} and {values.shape}")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("grid times must be strictly increasing")
        zero = np.flatnonzero(times == 0.0)
        if zero.size != 1:
            raise ValueError("grid must contain time 0 exactly once")
        if values[zero[0]] != 0.0:
            raise ValueError(f"path must start at 0, got value {values[zero[0]]} at time 0")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    # ----- constructors -------------------------------------------------

    @classmethod
    def from_values(cls, forward: Sequence[float], backward: Optional[Sequence[float]] = None,
                    dt: float = 1.0) -> "CadlagGrid":
        """
        Build from values on a regular grid

        Args:
            forward: values at times 0, dt, 2dt, ... (forward[0] must be 0)
            backward: values at times 0, -dt, -2dt, ... (backward[0] must be 0)
            dt: grid spacing

        Examples:
            >>> path = CadlagGrid.from_values([0, 1, -1, 2])
            >>> path.span
            (0.0, 3.0)
        """
        forward = np.asarray(forward, dtype=float)
        backward = np.zeros(1) if backward is None else np.asarray(backward, dtype=float)
        if forward.size < 1 or backward.size < 1:
            raise ValueError("forward and backward must both contain the value at time 0")
        if forward[0] != backward[0]:
            raise ValueError("forward and backward disagree at time 0")
        n_back = backward.size - 1
        times = dt * np.concatenate([-np.arange(n_back, 0, -1), np.arange(forward.size)])
        values = np.concatenate([backward[:0:-1], forward])
        return cls(times, values)

    @classmethod
    def from_steps(cls, steps_pos: Sequence[float], steps_neg: Optional[Sequence[float]] = None,
                   dt: float = 1.0) -> "CadlagGrid":
        """Build from increments: steps_neg[k] is the value change from -k*dt to -(k+1)*dt"""
        forward = np.concatenate([[0.0], np.cumsum(np.asarray(steps_pos, dtype=float))])
        backward = np.zeros(1) if steps_neg is None else np.concatenate(
            [[0.0], np.cumsum(np.asarray(steps_neg, dtype=float))])
        return cls.from_values(forward, backward, dt)

    # ----- views ----------------------------------------------------------

    @cached_property
    def zero_index(self) -> int:
        return int(np.flatnonzero(self.times == 0.0)[0])

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def forward_times(self) -> np.ndarray:
        return self.times[self.zero_index:]

    @property
    def forward_values(self) -> np.ndarray:
        return self.values[self.zero_index:]

    @cached_property
    def backward_times(self) -> np.ndarray:
        """Distances |t| of the grid points t <= 0, starting at 0"""
        return -self.times[self.zero_index::-1]

    @cached_property
    def backward_values(self) -> np.ndarray:
        """Values at t <= 0 ordered by increasing |t|"""
        return self.values[self.zero_index::-1]

    def check_in_span(self, t: float) -> None:
        lo, hi = self.span
        if not lo <= t <= hi:
            raise RangeError(f"time {t} outside path span [{lo}, {hi}]")

    def value_at(self, t: float) -> float:
        """Path value at an arbitrary time, using the side conventions"""
        self.check_in_span(t)
        if t >= 0:
            return float(self.values[np.searchsorted(self.times, t, side='right') - 1])
        return float(self.values[np.searchsorted(self.times, t, side='left')])

    def window(self, a: float) -> np.ndarray:
        """
        Values seen on [0, a] (a >= 0) or [a, 0] (a < 0), ordered outward from 0

        Grid-exact: the flat pieces contribute no values other than grid values.
        """
        self.check_in_span(a)
        if a >= 0:
            k = np.searchsorted(self.forward_times, a, side='right')
            return self.forward_values[:k]
        k = np.searchsorted(self.backward_times, -a, side='right')
        return self.backward_values[:k]
