"""Low-discrepancy point sets, their randomizations and the uniform generator.

Point families used throughout the package:

``lat``        rank-1 lattice + random shift modulo 1
``lat-baker``  rank-1 lattice + random shift + baker fold
``net``        Sobol' digital net + LMS scramble + digital shift
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .digitalnet import (
    W,
    DigitalNetB2,
    DirectionNumberError,
    DirectionNumbers,
    lms_scramble,
    load_direction_numbers,
    random_lms,
    rank_gf2,
    words_to_unit,
)
from .lattice import (
    LatticeRule,
    WeightsSpec,
    korobov,
    lattice_coordinate,
    lattice_rule,
    lattice_search,
    p_alpha_discrepancy,
    phi_alpha,
)
from .rng import MRG32k3a, rng_stream

FAMILIES = ("lat", "lat-baker", "net")
KINDS = ("shift", "shift-baker", "digital-shift", "lms-shift")


def baker(u):
    """Baker fold: 2u on [0, 1/2], 2 - 2u above."""
    v = 2.0 * np.asarray(u, dtype=np.float64)
    return np.where(v <= 1.0, v, 2.0 - v)


@dataclass(frozen=True, eq=False)
class Randomization:
    """Record of one randomization of a point construction.

    ``shift`` is a real vector for lattices and a vector of digit words for
    nets; ``L`` holds LMS matrices (rows as words) for ``lms-shift``.
    """

    kind: str
    shift: np.ndarray
    L: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown randomization kind {self.kind!r}")


def _check_pair(points, kind):
    is_lat = isinstance(points, LatticeRule)
    if is_lat and kind not in ("shift", "shift-baker"):
        raise TypeError(f"randomization {kind!r} does not apply to a lattice rule")
    if not is_lat and kind not in ("digital-shift", "lms-shift"):
        raise TypeError(f"randomization {kind!r} does not apply to a digital net")


def new_randomization(points, kind: str, rng: MRG32k3a, dims: int | None = None) -> Randomization:
    """Draw a fresh randomization of ``kind`` for ``dims`` dimensions of ``points``."""
    _check_pair(points, kind)
    dims = points.dim if dims is None else dims
    prov = {"stream": rng.stream, "substream": rng.substream, "state": rng.state}
    if kind in ("shift", "shift-baker"):
        return Randomization(kind, rng.random(dims), None, prov)
    L = random_lms(rng, dims, points.w) if kind == "lms-shift" else None
    shift = rng.randbits(dims, bits=W).astype(np.int64)
    return Randomization(kind, shift, L, prov)


def randomize(points, r: Randomization, i=None, j=None):
    """Randomized coordinates of ``points``.

    With ``i`` and ``j`` given, returns the single value for point ``i`` in
    dimension ``j``; otherwise the full (n, dim) array.
    """
    _check_pair(points, r.kind)
    if isinstance(points, LatticeRule):
        if i is not None:
            u = (points.coordinate(i, j) + r.shift[j]) % 1.0
            return float(baker(u)) if r.kind == "shift-baker" else float(u)
        u = (points.points() + r.shift[: points.dim]) % 1.0
        return baker(u) if r.kind == "shift-baker" else u
    C = points.C if r.L is None else lms_scramble(points.C, r.L[: points.dim], points.w)
    if i is not None:
        word = 0
        for c in range(points.k):
            if (i >> c) & 1:
                word ^= int(C[j, c])
        return float(words_to_unit(np.int64(word ^ int(r.shift[j])), points.w))
    words = points.digit_words(C) ^ r.shift[: points.dim]
    return words_to_unit(words, points.w)


def make_points(family: str, n: int, dim: int, weights: WeightsSpec = WeightsSpec()):
    """Unrandomized construction for a family name."""
    if family in ("lat", "lat-baker"):
        return lattice_rule(n, dim, weights)
    if family == "net":
        k = int(n).bit_length() - 1
        if n != 1 << k:
            raise ValueError("digital nets need n to be a power of 2")
        return DigitalNetB2.sobol(k, dim)
    raise ValueError(f"unknown point family {family!r}; choose from {FAMILIES}")


def family_kind(family: str) -> str:
    return {"lat": "shift", "lat-baker": "shift-baker", "net": "lms-shift"}[family]


class PointSet:
    """A construction paired with a randomization kind; draws fresh randomized copies."""

    def __init__(self, family: str, n: int, dim: int, weights: WeightsSpec = WeightsSpec()):
        self.family = family
        self.n = int(n)
        self.dim = int(dim)
        self.construction = make_points(family, n, dim, weights)
        self.kind = family_kind(family)

    def new_randomization(self, rng: MRG32k3a, dims: int | None = None) -> Randomization:
        return new_randomization(self.construction, self.kind, rng, dims)

    def block(self, r: Randomization, lo: int, hi: int) -> np.ndarray:
        """Randomized coordinates ``lo:hi`` of all points, shape (n, hi - lo)."""
        pts = self.construction
        if isinstance(pts, LatticeRule):
            u = (pts.points(range(lo, hi)) + r.shift[lo:hi]) % 1.0
            return baker(u) if r.kind == "shift-baker" else u
        C = pts.C[lo:hi]
        if r.L is not None:
            C = lms_scramble(C, r.L[lo:hi], pts.w)
        return words_to_unit(pts.digit_words(C) ^ r.shift[lo:hi], pts.w)

    def sample(self, rng: MRG32k3a) -> np.ndarray:
        """One independently randomized copy of all points, shape (n, dim)."""
        return randomize(self.construction, new_randomization(self.construction, self.kind, rng))

    def __repr__(self):
        return f"PointSet({self.family!r}, n={self.n}, dim={self.dim})"


__all__ = [
    "FAMILIES",
    "DigitalNetB2",
    "DirectionNumberError",
    "DirectionNumbers",
    "LatticeRule",
    "MRG32k3a",
    "PointSet",
    "Randomization",
    "WeightsSpec",
    "baker",
    "family_kind",
    "korobov",
    "lattice_coordinate",
    "lattice_rule",
    "lattice_search",
    "lms_scramble",
    "load_direction_numbers",
    "make_points",
    "new_randomization",
    "p_alpha_discrepancy",
    "phi_alpha",
    "random_lms",
    "randomize",
    "rank_gf2",
    "rng_stream",
]
