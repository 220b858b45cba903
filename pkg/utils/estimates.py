"""
Monte Carlo estimate type shared by every stochastic operation
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class McEstimate:
    """
    Point estimate with standard error, sample count and seed provenance

    `meta` carries free-form provenance (mesh, exclusions, one-sided flags).
    """
    mean: float
    std_error: float
    n: int
    seed: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @classmethod
    def from_samples(cls, samples: Sequence[float], seed: int,
                     meta: Optional[Dict[str, Any]] = None) -> "McEstimate":
        values = np.asarray(samples, dtype=float)
        if values.size < 1:
            raise ValueError("cannot estimate from an empty sample")
        std_error = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        return cls(float(values.mean()), std_error, int(values.size), int(seed), dict(meta or {}))

    @classmethod
    def from_proportion(cls, successes: int, n: int, seed: int,
                        meta: Optional[Dict[str, Any]] = None) -> "McEstimate":
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        p = successes / n
        return cls(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), int(n), int(seed), dict(meta or {}))

    @classmethod
    def from_moments(cls, parts: Iterable[Tuple[float, float, int]], seed: int,
                     meta: Optional[Dict[str, Any]] = None) -> "McEstimate":
        """
        Combine per-task (sum, sum of squares, count) triples

        fsum makes the reduction independent of the order the parts arrive in.
        """
        parts = list(parts)
        n = sum(count for _, _, count in parts)
        if n < 1:
            raise ValueError("no samples in any task")
        total = math.fsum(s for s, _, _ in parts)
        total_sq = math.fsum(s2 for _, s2, _ in parts)
        mean = total / n
        variance = max(total_sq / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
        return cls(mean, math.sqrt(variance / n), int(n), int(seed), dict(meta or {}))

    def agrees_with(self, target: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        """|mean - target| within `sigmas` standard errors (plus an absolute floor)"""
        return abs(self.mean - target) <= sigmas * self.std_error + floor

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': self.mean,
            'std_error': self.std_error,
            'n': self.n,
            'seed': self.seed,
            'meta': dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "McEstimate":
        return cls(float(data['mean']), float(data['std_error']), int(data['n']),
                   int(data['seed']), dict(data.get('meta', {})))


def moments(values: np.ndarray) -> Tuple[float, float, int]:
    """(sum, sum of squares, count) of a task's sample, for `McEstimate.from_moments`"""
    values = np.asarray(values, dtype=float)
    return math.fsum(values), math.fsum(values * values), int(values.size)


def pooled_proportion(parts: Iterable[McEstimate], seed: int,
                      meta: Optional[Dict[str, Any]] = None) -> McEstimate:
    """
    Pool proportion estimates of independent tasks into one

    Success counts are recovered as round(mean * n), so only estimates built
    with `McEstimate.from_proportion` should be pooled.
    """
    parts = list(parts)
    successes = sum(int(round(part.mean * part.n)) for part in parts)
    n = sum(part.n for part in parts)
    return McEstimate.from_proportion(successes, n, seed, meta)
