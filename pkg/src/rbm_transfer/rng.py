"""Seedable random streams.

All randomness goes through :class:`numpy.random.Generator` backed by the
PCG64 bit generator (PCG XSL-RR 128/64).  Independent streams for chain or
row ``i`` are derived from ``(seed, i)`` with :class:`numpy.random.SeedSequence`
spawn keys, so a row gets the same stream whether rows are processed
serially or split across workers.
"""

import numpy as np

from .errors import InvalidArgumentError

_MAX_SEED = 2**64 - 1


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed):
    """Root generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_check_seed(seed))))


def stream(seed, *index):
    """Generator for the sub-stream identified by ``index`` under ``seed``."""
    key = tuple(int(i) for i in index)
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def row_streams(seed, n, *prefix):
    """List of ``n`` independent generators, one per row."""
    return [stream(seed, *prefix, i) for i in range(n)]


def derive_seed(rng):
    """Draw a fresh 64-bit seed from ``rng`` (for handing to per-row streams)."""
    return int(rng.integers(0, 2**63 - 1, dtype=np.int64))
