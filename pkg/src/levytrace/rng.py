"""Counter-based random streams and block-ordered parallel evaluation.

Every random number is drawn from a Philox generator keyed by
``(seed, stream, block, chunk)``.  Paths are grouped in fixed-size blocks,
so the numbers a path sees depend only on its index and never on how the
blocks are distributed over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["BLOCK", "generator", "block_ranges", "map_blocks", "stream_id"]

BLOCK = 2048


def generator(seed, *key):
    """Philox generator for ``seed`` and an integer key tuple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def stream_id(name):
    """Stable small integer for a named purpose (independent of PYTHONHASHSEED)."""
    h = 0
    for ch in name.encode():
        h = (h * 131 + ch) % 2_147_483_647
    return h


def block_ranges(n, block=BLOCK):
    """``[(block_index, start, stop), ...]`` covering ``range(n)``."""
    return [(b, s, min(s + block, n)) for b, s in enumerate(range(0, n, block))]


def map_blocks(fn, n, workers=1, block=BLOCK):
    """Apply ``fn(block_index, start, stop)`` to every block; results in block order."""
    blocks = block_ranges(n, block)
    workers = max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        return [fn(*b) for b in blocks]
    with ThreadPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def fsum_blocks(values):
    """Order-independent exact sum of per-block partial sums."""
    return math.fsum(values)
