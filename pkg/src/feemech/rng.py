"""Counter-based random substreams.

Every random draw in the package comes from ``substream(seed, purpose, index)``.
The generator is a Philox counter-based bit generator keyed by a
``SeedSequence`` whose spawn key is ``(purpose code, index)``, so the stream for
a given (seed, purpose, index) triple never depends on how many other streams
exist or which thread consumes it.

Monte Carlo samples of size ``n`` are split into fixed chunks of ``CHUNK``
draws; chunk ``i`` always reads from substream index ``i``. Chunks may be
generated on several threads but are concatenated in index order, so the
thread count cannot change a single output bit.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .errors import DomainError

CHUNK = 65_536

PURPOSES = {
    "shocks": 1,
    "token": 2,
    "demand": 3,
    "token_path": 4,
}

_U64 = 2**64


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator for one (purpose, index) pair under ``seed``."""
    seed = check_seed(seed)
    if purpose not in PURPOSES:
        raise DomainError(f"unknown substream purpose {purpose!r}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(PURPOSES[purpose], int(index)))
    return np.random.Generator(np.random.Philox(ss))


def chunked(
    n: int,
    seed: int,
    purpose: str,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Concatenate ``draw(gen_i, size_i)`` over the fixed chunk layout of ``n``."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    sizes = [CHUNK] * (n // CHUNK)
    if n % CHUNK:
        sizes.append(n % CHUNK)

    def work(i):
        return draw(substream(seed, purpose, i), sizes[i])

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    return np.concatenate(parts, axis=0)
