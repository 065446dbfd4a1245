"""Counter-based random number generation (Philox-4x32, 10 rounds).

Draws are a pure function of ``(seed, stream, block)``, so any path can be
regenerated in isolation and results cannot depend on scheduling or worker
count. One block yields four 32-bit words, which we spend as either two
uniforms in [0, 1) or two standard normals (Box-Muller). Consumers always
advance by whole blocks: a request for n variates burns ceil(n/2) blocks and
discards the odd leftover, so draw positions stay aligned across
implementations.

The vectorized functions here are the reference implementation; the compiled
per-path kernel carries a scalar transcription of the same arithmetic
(``philox_block_py`` below is the plain-integer form both are tested against).
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85

_M0 = np.uint64(PHILOX_M0)
_M1 = np.uint64(PHILOX_M1)
_W0 = np.uint64(PHILOX_W0)
_W1 = np.uint64(PHILOX_W1)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)

INV_2_53 = 2.0**-53
TWO_PI = 6.283185307179586


def philox_words(
    seed: int, streams: NDArray[np.uint64], blocks: NDArray[np.uint64]
) -> tuple[NDArray[np.uint64], ...]:
    """Run the 10-round bijection on counter (block, stream) under ``seed``.

    ``streams`` and ``blocks`` must broadcast against each other. Returns the
    four output words as uint64 arrays holding 32-bit values.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    k0 = np.uint64(seed & 0xFFFFFFFF)
    k1 = np.uint64(seed >> 32)
    streams = np.asarray(streams, dtype=np.uint64)
    blocks = np.asarray(blocks, dtype=np.uint64)
    c0 = blocks & _MASK32
    c1 = blocks >> _SH32
    c2 = streams & _MASK32
    c3 = streams >> _SH32
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    c0, c1 = c0.copy(), c1.copy()
    c2, c3 = c2.copy(), c3.copy()
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SH32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SH32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def philox_block_py(seed: int, stream: int, block: int) -> tuple[int, int, int, int]:
    """Plain-integer scalar form of :func:`philox_words`, for cross-checking."""
    k0 = seed & 0xFFFFFFFF
    k1 = (seed >> 32) & 0xFFFFFFFF
    c0 = block & 0xFFFFFFFF
    c1 = (block >> 32) & 0xFFFFFFFF
    c2 = stream & 0xFFFFFFFF
    c3 = (stream >> 32) & 0xFFFFFFFF
    for _ in range(10):
        p0 = (PHILOX_M0 * c0) & 0xFFFFFFFFFFFFFFFF
        p1 = (PHILOX_M1 * c2) & 0xFFFFFFFFFFFFFFFF
        c0 = (p1 >> 32) ^ c1 ^ k0
        c1 = p1 & 0xFFFFFFFF
        c2 = (p0 >> 32) ^ c3 ^ k1
        c3 = p0 & 0xFFFFFFFF
        k0 = (k0 + PHILOX_W0) & 0xFFFFFFFF
        k1 = (k1 + PHILOX_W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def words_to_uniforms(
    x0: NDArray[np.uint64],
    x1: NDArray[np.uint64],
    x2: NDArray[np.uint64],
    x3: NDArray[np.uint64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Two uniforms in [0, 1) per block: 53 high bits of each word pair."""
    u1 = ((x0 << _SH32 | x1) >> _SH11).astype(np.float64) * INV_2_53
    u2 = ((x2 << _SH32 | x3) >> _SH11).astype(np.float64) * INV_2_53
    return u1, u2


def words_to_normals(x0, x1, x2, x3):
    """Two standard normals per block via Box-Muller on the block's uniforms."""
    u1, u2 = words_to_uniforms(x0, x1, x2, x3)
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    th = TWO_PI * u2
    return r * np.cos(th), r * np.sin(th)


def _matrix(seed, streams, block0, n, convert):
    streams = np.asarray(streams, dtype=np.uint64)
    p = streams.shape[0]
    if n == 0:
        return np.empty((p, 0), dtype=np.float64)
    nb = (n + 1) // 2
    blocks = np.asarray(block0, dtype=np.uint64).reshape(-1, 1) + np.arange(
        nb, dtype=np.uint64
    )
    if blocks.shape[0] == 1 and p > 1:
        blocks = np.broadcast_to(blocks, (p, nb))
    words = philox_words(seed, streams.reshape(-1, 1), blocks)
    a, b = convert(*words)
    out = np.empty((p, 2 * nb), dtype=np.float64)
    out[:, 0::2] = a
    out[:, 1::2] = b
    return out[:, :n]


def uniform_matrix(seed, streams, block0, n) -> NDArray[np.float64]:
    """(len(streams), n) uniforms; each stream consumes ceil(n/2) blocks from block0."""
    return _matrix(seed, streams, block0, n, words_to_uniforms)


def normal_matrix(seed, streams, block0, n) -> NDArray[np.float64]:
    """(len(streams), n) standard normals; block accounting as uniform_matrix."""
    return _matrix(seed, streams, block0, n, words_to_normals)


class PhiloxStream:
    """Stateful view of one stream: remembers the next unread block.

    Exposes ``random(n)`` so it can stand in for a numpy Generator wherever
    only uniforms are consumed.
    """

    def __init__(self, seed: int, stream: int = 0, block: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream)
        self.block = int(block)

    def _take(self, n: int, convert) -> NDArray[np.float64]:
        if n < 0:
            raise ValueError("n must be nonnegative")
        row = _matrix(
            self.seed,
            np.array([self.stream], dtype=np.uint64),
            np.array([self.block], dtype=np.uint64),
            n,
            convert,
        )[0]
        self.block += (n + 1) // 2
        return row

    def uniforms(self, n: int) -> NDArray[np.float64]:
        return self._take(n, words_to_uniforms)

    def normals(self, n: int) -> NDArray[np.float64]:
        return self._take(n, words_to_normals)

    # numpy.random.Generator-compatible spelling
    def random(self, n: int) -> NDArray[np.float64]:
        return self.uniforms(n)
