"""
Splittable random streams

Every stochastic operation takes an explicit numpy Generator. Streams for
parallel tasks are derived from (seed, experiment, task-index) keys through
a SeedSequence feeding the counter-based Philox bit generator, so a task's
draws depend only on its key and never on which worker runs it.
"""

import hashlib
from typing import List, Union

import numpy as np

RandomStream = np.random.Generator
StreamKey = Union[int, str]

MASK64 = (1 << 64) - 1


def _key_word(key: StreamKey) -> int:
    """
    Map a stream key to a 64-bit word

    Integers are used as-is (masked to 64 bits); strings are hashed so that
    experiment names give stable, platform-independent words.

    Examples:
        >>> _key_word(7)
        7
        >>> _key_word("exit-gambler") == _key_word("exit-gambler")
        True
    """
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    digest = hashlib.sha256(str(key).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def derive_stream(seed: int, *keys: StreamKey) -> RandomStream:
    """
    Derive an independent stream keyed by the master seed and a key path

    Args:
        seed: Master seed (64-bit; larger values are masked)
        *keys: Key path, e.g. (experiment name, task index)

    Returns:
        numpy Generator backed by Philox
    """
    entropy = [int(seed) & MASK64] + [_key_word(key) for key in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def stream_seed(rng: RandomStream) -> int:
    """Master seed a stream was derived from (0 when it was not built by `derive_stream`)"""
    seed_seq = getattr(rng.bit_generator, 'seed_seq', None)
    entropy = getattr(seed_seq, 'entropy', None)
    if entropy is None:
        return 0
    if isinstance(entropy, (list, tuple, np.ndarray)):
        return int(entropy[0]) if len(entropy) else 0
    return int(entropy) & MASK64


def spawn_streams(seed: int, n_tasks: int, *keys: StreamKey) -> List[RandomStream]:
    """Streams for tasks 0..n_tasks-1 under a common key path"""
    return [derive_stream(seed, *keys, task_index) for task_index in range(n_tasks)]


def task_sizes(total: int, task_size: int) -> List[int]:
    """
    Split `total` samples into fixed-size tasks (last one may be short)

    The split depends only on (total, task_size), which keeps results
    independent of the worker count.

    Examples:
        >>> task_sizes(25, 10)
        [10, 10, 5]
    """
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    if task_size < 1:
        raise ValueError(f"task_size must be >= 1, got {task_size}")
    full, rest = divmod(total, task_size)
    return [task_size] * full + ([rest] if rest else [])
