"""Seed derivation and chunked Gaussian streams.

Every random quantity in the package comes from numpy's PCG64 bit generator
driven by a ``numpy.random.SeedSequence``. Normal variates use numpy's
ziggurat sampler (``Generator.standard_normal``), which is fixed for a given
numpy release, so a seed reproduces the same sequence on every platform.

Long streams are produced in fixed-size chunks. Chunk ``i`` of a stream with
seed sequence ``s`` is drawn from ``SeedSequence(s.entropy, spawn_key=s.spawn_key + (i,))``,
which makes the output independent of how many workers generate it and of
how a caller slices the request.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator

import numpy as np

CHUNK = 1 << 18


def as_seed_sequence(seed: int | np.random.SeedSequence) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if int(seed) < 0 or int(seed) >= 1 << 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.SeedSequence(int(seed))


def child(seed: int | np.random.SeedSequence, *key: int | str) -> np.random.SeedSequence:
    """Deterministic named substream.

    String keys are mapped through CRC-32 so that e.g. ``child(seed, "shot")``
    is stable across runs and Python versions.
    """
    base = as_seed_sequence(seed)
    ints = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + ints)


def generator(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def _chunk(seq: np.random.SeedSequence, index: int, size: int) -> np.ndarray:
    return generator(child(seq, index)).standard_normal(size)


def standard_normals(
    seed: int | np.random.SeedSequence, count: int, workers: int = 1
) -> np.ndarray:
    """First ``count`` variates of the chunked N(0, 1) stream for ``seed``."""
    seq = as_seed_sequence(seed)
    if count <= 0:
        return np.empty(0)
    n_chunks = -(-count // CHUNK)
    sizes = [min(CHUNK, count - i * CHUNK) for i in range(n_chunks)]
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda i: _chunk(seq, i, sizes[i]), range(n_chunks)))
    else:
        parts = [_chunk(seq, i, sizes[i]) for i in range(n_chunks)]
    return np.concatenate(parts)


def iter_standard_normals(seed: int | np.random.SeedSequence) -> Iterator[np.ndarray]:
    """Endless iterator over the same stream, one full chunk at a time."""
    seq = as_seed_sequence(seed)
    i = 0
    while True:
        yield _chunk(seq, i, CHUNK)
        i += 1
