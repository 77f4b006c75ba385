"""MRG32k3a combined multiple recursive generator with streams and substreams.

The generator follows L'Ecuyer's RngStreams layout: the period is split into
streams of length 2**127, each split into substreams of length 2**76. Jumps
are done with precomputed powers of the 3x3 transition matrices.
"""

from __future__ import annotations

from typing import Sequence

import numba
import numpy as np

M1 = 4294967087
M2 = 4294944443
A12 = 1403580
A13N = 810728
A21 = 527612
A23N = 1370589
NORM = 2.328306549295727688e-10

DEFAULT_SEED = (12345, 12345, 12345, 12345, 12345, 12345)

_A1 = ((0, 1, 0), (0, 0, 1), (M1 - A13N, A12, 0))
_A2 = ((0, 1, 0), (0, 0, 1), (M2 - A23N, 0, A21))


def _matmul(a, b, m):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) % m for j in range(3))
        for i in range(3)
    )


def _matvec(a, v, m):
    return tuple(sum(a[i][k] * v[k] for k in range(3)) % m for i in range(3))


def _matpow(a, e, m):
    result = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    base = a
    while e:
        if e & 1:
            result = _matmul(result, base, m)
        base = _matmul(base, base, m)
        e >>= 1
    return result


def _matpow2(a, e, m):
    """a ** (2 ** e) mod m by repeated squaring."""
    for _ in range(e):
        a = _matmul(a, a, m)
    return a


_A1P76 = _matpow2(_A1, 76, M1)
_A2P76 = _matpow2(_A2, 76, M2)
_A1P127 = _matpow2(_A1, 127, M1)
_A2P127 = _matpow2(_A2, 127, M2)


def _check_seed(seed: Sequence[int]) -> tuple[int, ...]:
    seed = tuple(int(v) for v in seed)
    if len(seed) != 6:
        raise ValueError("MRG32k3a seed needs 6 components")
    if any(v < 0 for v in seed):
        raise ValueError("seed components must be nonnegative")
    if any(v >= M1 for v in seed[:3]) or any(v >= M2 for v in seed[3:]):
        raise ValueError("seed component out of range")
    if not any(seed[:3]) or not any(seed[3:]):
        raise ValueError("first or last three seed components are all zero")
    return seed


def seed_from_int(seed: int) -> tuple[int, ...]:
    """Expand an integer into a valid six-component seed (all components equal)."""
    v1 = int(seed) % M1
    v2 = int(seed) % M2
    if v1 == 0 or v2 == 0:
        raise ValueError(f"integer seed {seed} maps to an all-zero component")
    return (v1, v1, v1, v2, v2, v2)


@numba.njit(cache=True)
def _fill(state, out):
    s10, s11, s12, s20, s21, s22 = state[0], state[1], state[2], state[3], state[4], state[5]
    for i in range(out.size):
        p1 = (A12 * s11 - A13N * s10) % M1
        s10 = s11
        s11 = s12
        s12 = p1
        p2 = (A21 * s22 - A23N * s20) % M2
        s20 = s21
        s21 = s22
        s22 = p2
        if p1 > p2:
            out[i] = (p1 - p2) * NORM
        else:
            out[i] = (p1 - p2 + M1) * NORM
    state[0] = s10
    state[1] = s11
    state[2] = s12
    state[3] = s20
    state[4] = s21
    state[5] = s22


class MRG32k3a:
    """Random stream backed by MRG32k3a.

    Parameters
    ----------
    seed : int or sequence of 6 ints, optional
        Package seed. The default is the canonical ``12345`` repeated six times.
    stream : int
        Index of the stream; stream ``i`` starts ``i * 2**127`` steps after the seed.
    substream : int
        Index of the substream within the stream.
    """

    def __init__(self, seed=DEFAULT_SEED, stream: int = 0, substream: int = 0):
        if isinstance(seed, (int, np.integer)):
            seed = seed_from_int(seed)
        base = _check_seed(seed)
        if stream < 0 or substream < 0:
            raise ValueError("stream and substream indices must be nonnegative")
        s1, s2 = base[:3], base[3:]
        if stream:
            s1 = _matvec(_matpow(_A1P127, stream, M1), s1, M1)
            s2 = _matvec(_matpow(_A2P127, stream, M2), s2, M2)
        self._stream_start = s1 + s2
        if substream:
            s1 = _matvec(_matpow(_A1P76, substream, M1), s1, M1)
            s2 = _matvec(_matpow(_A2P76, substream, M2), s2, M2)
        self._substream_start = s1 + s2
        self.stream = int(stream)
        self.substream = int(substream)
        self._state = np.array(self._substream_start, dtype=np.int64)

    @property
    def state(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self._state)

    def random(self, size=None):
        """Uniforms in (0, 1). Returns a float if ``size`` is None."""
        if size is None:
            out = np.empty(1)
            _fill(self._state, out)
            return float(out[0])
        out = np.empty(size)
        _fill(self._state, out.reshape(-1))
        return out

    def randbits(self, size, bits: int = 31):
        """Random integers in ``[0, 2**bits)`` built from the top bits of uniforms."""
        if not 1 <= bits <= 31:
            raise ValueError("bits must be in 1..31")
        u = self.random(size)
        return np.floor(u * (1 << bits)).astype(np.uint64)

    def next_substream(self) -> "MRG32k3a":
        return self.spawn(self.substream + 1)

    def spawn(self, substream: int) -> "MRG32k3a":
        """Fresh generator positioned at ``substream`` of this generator's stream."""
        child = MRG32k3a.__new__(MRG32k3a)
        s1, s2 = self._stream_start[:3], self._stream_start[3:]
        if substream:
            s1 = _matvec(_matpow(_A1P76, substream, M1), s1, M1)
            s2 = _matvec(_matpow(_A2P76, substream, M2), s2, M2)
        child._stream_start = self._stream_start
        child._substream_start = s1 + s2
        child.stream = self.stream
        child.substream = int(substream)
        child._state = np.array(child._substream_start, dtype=np.int64)
        return child

    def reset_substream(self) -> None:
        self._state[:] = self._substream_start


def rng_stream(seed=DEFAULT_SEED, stream: int = 0) -> MRG32k3a:
    """Reproducible uniform source for ``(seed, stream)``."""
    return MRG32k3a(seed, stream=stream)
