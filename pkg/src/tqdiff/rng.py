"""Counter-based random streams (Philox4x32-10) vectorized over trajectories.

The k-th standard normal of trajectory j under seed s is a pure function of
(s, j, k, stream tag): no generator state is carried between calls, so results
do not depend on how trajectories are batched or scheduled.

Layout: key = (seed low 32 bits, seed high 32 bits); counter = (block low,
block high, trajectory index, stream tag), where block = k // 4.  The four
32-bit outputs of a block become uniforms u = (w + 0.5) / 2^32 in (0, 1) and
two Box-Muller pairs give four normals.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85

STREAM_NOISE = 0
STREAM_INIT = 1
STREAM_INIT_VELOCITY = 2


def philox4x32(counters: np.ndarray, key: tuple[int, int], rounds: int = 10) -> np.ndarray:
    """Philox4x32 bijection. ``counters`` has shape (..., 4), 32-bit words in any int dtype."""
    c = np.asarray(counters, dtype=np.uint64) & MASK32
    c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> np.uint64(32), p0 & MASK32
        hi1, lo1 = p1 >> np.uint64(32), p1 & MASK32
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def seed_key(seed: int) -> tuple[int, int]:
    if not 0 <= seed < 2**64:
        raise ParameterError("seed must be a 64-bit unsigned integer")
    return seed & 0xFFFFFFFF, seed >> 32


def normal_blocks(seed: int, traj: np.ndarray, first_block: int, n_blocks: int, stream: int = STREAM_NOISE) -> np.ndarray:
    """Normals for blocks [first_block, first_block + n_blocks); shape (len(traj), 4 * n_blocks)."""
    traj = np.asarray(traj, dtype=np.uint64)
    blocks = np.arange(first_block, first_block + n_blocks, dtype=np.uint64)
    ctr = np.empty((traj.size, n_blocks, 4), dtype=np.uint64)
    ctr[..., 0] = blocks & MASK32
    ctr[..., 1] = blocks >> np.uint64(32)
    ctr[..., 2] = traj[:, None]
    ctr[..., 3] = stream
    words = philox4x32(ctr, seed_key(seed))
    u = (words.astype(np.float64) + 0.5) * 2.0**-32
    rad = np.sqrt(-2.0 * np.log(u[..., 0::2]))
    ang = 2.0 * np.pi * u[..., 1::2]
    z = np.empty_like(u)
    z[..., 0::2] = rad * np.cos(ang)
    z[..., 1::2] = rad * np.sin(ang)
    return z.reshape(traj.size, 4 * n_blocks)


class NormalStream:
    """Cached view of one stream tag for a fixed set of trajectories.

    ``draw(k)`` returns the k-th normal of every trajectory.  Values are a pure
    function of (seed, trajectory, k, stream); the cache only saves work.
    """

    def __init__(self, seed: int, n_traj: int, stream: int = STREAM_NOISE, chunk_blocks: int = 64):
        self.seed = int(seed)
        self.stream = stream
        self.traj = np.arange(n_traj, dtype=np.uint64)
        self.chunk_blocks = chunk_blocks
        self._first = -1
        self._cache = np.empty((n_traj, 0))

    def draw(self, k: int) -> np.ndarray:
        block = k // 4
        if not (self._first >= 0 and self._first <= block < self._first + self.chunk_blocks):
            self._first = block
            self._cache = normal_blocks(self.seed, self.traj, block, self.chunk_blocks, self.stream)
        return self._cache[:, 4 * (block - self._first) + k % 4]


def normals(seed: int, n_traj: int, count: int = 1, stream: int = STREAM_NOISE) -> np.ndarray:
    """First ``count`` normals of each of ``n_traj`` trajectories; shape (n_traj, count)."""
    n_blocks = -(-count // 4)
    return normal_blocks(seed, np.arange(n_traj), 0, n_blocks, stream)[:, :count]
