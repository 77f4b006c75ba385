"""Base-2 digital nets (Sobol' construction) with LMS and digital-shift randomization.

Generating matrices are stored column-wise: ``C[j, c]`` is column ``c`` of
dimension ``j`` as a ``w``-bit integer whose most significant bit is the first
output digit. Point ``i`` with binary digits ``i_0, i_1, ...`` (least significant
first) has digit word ``XOR_c i_c C[j, c]`` in dimension ``j``.
"""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

W = 31  # output digits
DIRECTION_ENV = "TAULEAP_RQMC_DIRECTION_NUMBERS"
_DEFAULT_FILE = "joe_kuo_21201.txt.gz"


class DirectionNumberError(ValueError):
    pass


@dataclass(frozen=True)
class DirectionNumbers:
    """Primitive polynomials and initial direction numbers, dimensions 2.. ."""

    s: tuple[int, ...]
    a: tuple[int, ...]
    m: tuple[tuple[int, ...], ...]

    @property
    def max_dim(self) -> int:
        return len(self.s) + 1

    def matrices(self, k: int, dim: int, w: int = W) -> np.ndarray:
        """Generating matrices for ``dim`` dimensions and ``2**k`` points; shape (dim, k)."""
        if dim > self.max_dim:
            raise DirectionNumberError(
                f"requested dimension {dim} exceeds the {self.max_dim} dimensions of the direction-number file"
            )
        if k > w:
            raise ValueError(f"k={k} exceeds the w={w} output digits")
        C = np.zeros((dim, k), dtype=np.int64)
        # dimension 1: reflected identity, u_i = i / n
        for c in range(k):
            C[0, c] = 1 << (w - k + c)
        for j in range(1, dim):
            s, a, m = self.s[j - 1], self.a[j - 1], list(self.m[j - 1])
            while len(m) < k:
                i = len(m)
                new = m[i - s] ^ (m[i - s] << s)
                for t in range(1, s):
                    if (a >> (s - 1 - t)) & 1:
                        new ^= m[i - t] << t
                m.append(new)
            for c in range(k):
                # v_c = m_c / 2^(c+1), placed in w bits
                C[j, c] = m[c] << (w - c - 1)
        return C


def _open_text(path):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rt")
    return open(path)


def load_direction_numbers(path=None) -> DirectionNumbers:
    """Read a Joe-Kuo style file: one line ``d s a m_1 ... m_s`` per dimension >= 2.

    Without a path, the env var ``TAULEAP_RQMC_DIRECTION_NUMBERS`` is consulted,
    then the shipped 21201-dimension table.
    """
    if path is None:
        path = os.environ.get(DIRECTION_ENV)
    if path is None:
        return _default_direction_numbers()
    with _open_text(path) as fh:
        return _parse(fh)


@lru_cache(maxsize=1)
def _default_direction_numbers() -> DirectionNumbers:
    ref = resources.files("tauleap_rqmc.data").joinpath(_DEFAULT_FILE)
    with resources.as_file(ref) as p:
        with _open_text(p) as fh:
            return _parse(fh)


def _parse(lines) -> DirectionNumbers:
    S, A, M = [], [], []
    expect = 2
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or not parts[0].lstrip("-").isdigit():
            continue  # header or blank
        try:
            vals = [int(v) for v in parts]
        except ValueError:
            raise DirectionNumberError(f"line {lineno}: non-integer entry") from None
        if len(vals) < 3:
            raise DirectionNumberError(f"line {lineno}: expected 'd s a m_1 ... m_s'")
        d, s, a, m = vals[0], vals[1], vals[2], vals[3:]
        if d != expect:
            raise DirectionNumberError(f"line {lineno}: dimension {d} out of sequence (expected {expect})")
        if s < 1 or len(m) != s:
            raise DirectionNumberError(f"line {lineno}: expected {s} direction numbers, got {len(m)}")
        if not 0 <= a < (1 << max(s - 1, 0)) and not (s == 1 and a == 0):
            raise DirectionNumberError(f"line {lineno}: polynomial coefficient a={a} out of range")
        for i, mi in enumerate(m):
            if mi % 2 == 0 or not 0 < mi < (1 << (i + 1)):
                raise DirectionNumberError(f"line {lineno}: m_{i + 1}={mi} must be odd and < 2^{i + 1}")
        S.append(s)
        A.append(a)
        M.append(tuple(m))
        expect += 1
    if not S:
        raise DirectionNumberError("no direction numbers found")
    return DirectionNumbers(tuple(S), tuple(A), tuple(M))


def _digits(i: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Digit words for points ``i`` (shape n) in all dims; returns (n, dim) int64."""
    out = np.zeros((i.size, C.shape[0]), dtype=np.int64)
    for c in range(C.shape[1]):
        bit = ((i >> c) & 1).astype(bool)
        out[bit] ^= C[:, c]
    return out


def rank_gf2(cols, w: int = W) -> int:
    """Rank over GF(2) of a matrix given as column words."""
    rows = [int(v) for v in cols]
    rank = 0
    for bit in range(w - 1, -1, -1):
        piv = next((r for r in rows if (r >> bit) & 1), None)
        if piv is None:
            continue
        rows.remove(piv)
        rows = [r ^ piv if (r >> bit) & 1 else r for r in rows]
        rank += 1
    return rank


def random_lms(rng, dim: int, w: int = W) -> np.ndarray:
    """Random lower-triangular w x w binary matrices with unit diagonal.

    Row ``r`` (digit ``r+1`` of the output) is stored as a w-bit word in the
    same MSB-first convention: bit ``w-1-c`` is column ``c``.
    """
    L = np.zeros((dim, w), dtype=np.int64)
    bits = rng.randbits((dim, w), bits=W)
    for r in range(w):
        below = bits[:, r].astype(np.int64) >> (W - r) if r else np.zeros(dim, np.int64)
        # columns 0..r-1 random, column r is the unit diagonal
        L[:, r] = (below << (w - r)) | (1 << (w - 1 - r))
    return L


def lms_scramble(C: np.ndarray, L: np.ndarray, w: int = W) -> np.ndarray:
    """C' = L C mod 2 for every dimension and column."""
    out = np.zeros_like(C)
    for r in range(w):
        # digit r of each column: parity of (row r of L) AND column
        par = np.bitwise_count(L[:, r][:, None] & C).astype(np.int64) & 1
        out |= par << (w - 1 - r)
    return out


@dataclass(frozen=True, eq=False)
class DigitalNetB2:
    """First ``2**k`` points of a Sobol' net in ``dim`` dimensions.

    Dimension 1 is the reflected identity, so its coordinate is ``i / n``.
    """

    k: int
    C: np.ndarray  # (dim, k) column words
    w: int = W

    @classmethod
    def sobol(cls, k: int, dim: int, numbers: DirectionNumbers | None = None) -> "DigitalNetB2":
        numbers = numbers or load_direction_numbers()
        return cls(k, numbers.matrices(k, dim, W), W)

    @property
    def n(self) -> int:
        return 1 << self.k

    @property
    def dim(self) -> int:
        return self.C.shape[0]

    def digit_words(self, C: np.ndarray | None = None) -> np.ndarray:
        return _digits(np.arange(self.n, dtype=np.int64), self.C if C is None else C)

    def points(self) -> np.ndarray:
        """Unrandomized points, exact dyadic values in [0, 1)."""
        return self.digit_words() / float(1 << self.w)

    def coordinate(self, i: int, j: int) -> float:
        word = 0
        for c in range(self.k):
            if (i >> c) & 1:
                word ^= int(self.C[j, c])
        return word / float(1 << self.w)

    def scrambled(self, L: np.ndarray) -> "DigitalNetB2":
        return DigitalNetB2(self.k, lms_scramble(self.C, L, self.w), self.w)


def words_to_unit(words: np.ndarray, w: int = W) -> np.ndarray:
    """Map digit words to reals, centring in the cell of width 2**-w so values lie in (0, 1)."""
    return (words + 0.5) / float(1 << w)
