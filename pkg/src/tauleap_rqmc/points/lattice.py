"""Rank-1 lattice rules, the weighted P_alpha criterion and CBC search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numba
import numpy as np
from scipy.special import bernoulli, comb


@dataclass(frozen=True)
class WeightsSpec:
    """Order-dependent product weights rho**|u| for the P_alpha criterion."""

    rho: float = 0.6
    alpha: int = 2

    def __post_init__(self):
        if not 0.0 < self.rho:
            raise ValueError("rho must be positive")
        if self.alpha < 2 or self.alpha % 2:
            raise ValueError("alpha must be an even integer >= 2")


@dataclass(frozen=True)
class LatticeRule:
    """Rank-1 lattice ``u_i = (i * a / n) mod 1``."""

    n: int
    a: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(v) for v in self.a))
        if self.n < 1:
            raise ValueError("n must be positive")
        for v in self.a:
            if math.gcd(v, self.n) != 1 and self.n > 1:
                raise ValueError(f"generator component {v} is not coprime with n={self.n}")

    @property
    def dim(self) -> int:
        return len(self.a)

    def coordinate(self, i: int, j: int) -> float:
        return (i * self.a[j] % self.n) / self.n

    def points(self, dims: Sequence[int] | None = None) -> np.ndarray:
        """All n points (n, dim) as exact multiples of 1/n."""
        a = np.asarray(self.a if dims is None else [self.a[j] for j in dims], dtype=np.int64)
        i = np.arange(self.n, dtype=np.int64)[:, None]
        return (i * a % self.n) / self.n


def lattice_coordinate(rule: LatticeRule, i: int, j: int) -> float:
    if not (0 <= i < rule.n and 0 <= j < rule.dim):
        raise IndexError("point or dimension index out of range")
    return rule.coordinate(i, j)


def phi_alpha(u, alpha: int = 2):
    """Kernel -(-4 pi^2)^(alpha/2) B_alpha(u) / alpha!."""
    u = np.asarray(u, dtype=np.float64)
    if alpha == 2:
        return 2.0 * np.pi**2 * (u * u - u + 1.0 / 6.0)
    B = bernoulli(alpha)
    poly = sum(comb(alpha, k, exact=True) * B[k] * u ** (alpha - k) for k in range(alpha + 1))
    return -((-4.0 * np.pi**2) ** (alpha // 2)) * poly / math.factorial(alpha)


def p_alpha_discrepancy(rule: LatticeRule, weights: WeightsSpec = WeightsSpec()) -> float:
    """Weighted squared P_alpha discrepancy via the product identity."""
    u = rule.points()
    prod = np.prod(1.0 + weights.rho * phi_alpha(u, weights.alpha), axis=1)
    return float(np.mean(prod - 1.0))


@numba.njit(cache=True)
def _cbc(n, s_dim, rho, cand, phi_table):
    # phi_table[r] = phi(r / n); prod[i] = running product over chosen dims
    prod = np.empty(n)
    for i in range(n):
        prod[i] = 1.0 + rho * phi_table[i]
    a = np.empty(s_dim, dtype=np.int64)
    a[0] = 1
    for j in range(1, s_dim):
        best = np.inf
        best_a = cand[0]
        for c in cand:
            tot = 0.0
            r = 0
            for i in range(n):
                tot += prod[i] * (1.0 + rho * phi_table[r])
                r += c
                if r >= n:
                    r -= n
            if tot < best:
                best = tot
                best_a = c
        a[j] = best_a
        r = 0
        for i in range(n):
            prod[i] *= 1.0 + rho * phi_table[r]
            r += best_a
            if r >= n:
                r -= n
    return a


# Above this many candidates per component the search samples a fixed subset.
MAX_CANDIDATES = 16384


def _candidates(n: int, max_candidates: int | None = MAX_CANDIDATES) -> np.ndarray:
    # phi(u) = phi(1 - u) makes a and n - a equivalent; keep the smaller one.
    if n == 1:
        return np.array([1], dtype=np.int64)
    c = np.arange(1, n // 2 + 1, dtype=np.int64)
    c = c[np.gcd(c, n) == 1]
    if max_candidates is not None and c.size > max_candidates:
        pick = np.random.default_rng(n).choice(c.size, max_candidates, replace=False)
        c = np.sort(c[pick])
    return c


def lattice_search(
    n: int, s_dim: int, weights: WeightsSpec = WeightsSpec(), max_candidates: int | None = MAX_CANDIDATES
) -> LatticeRule:
    """Component-by-component greedy minimization of the weighted P_alpha criterion.

    ``a_1 = 1``; each later component is the smallest coprime integer that
    minimizes the criterion given the earlier ones. The full candidate set is
    scanned for ``n <= 2**16``; beyond that a reproducible random subset of
    ``max_candidates`` values is used (pass ``None`` for the exhaustive scan).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if s_dim < 1:
        raise ValueError("s_dim must be at least 1")
    r = np.arange(n)
    # symmetric table so a and n - a tie exactly
    table = phi_alpha(np.minimum(r, n - r) / n, weights.alpha)
    a = _cbc(n, s_dim, float(weights.rho), _candidates(n, max_candidates), table)
    return LatticeRule(n, tuple(int(v) for v in a))


def korobov(n: int, s_dim: int, g: int = 3) -> LatticeRule:
    """Korobov rule a_j = g**(j-1) mod n."""
    return LatticeRule(n, tuple(pow(g, j, n) for j in range(s_dim)))


@lru_cache(maxsize=1)
def _lattice_cache() -> dict:
    try:
        text = resources.files("tauleap_rqmc.data").joinpath("lattices.json").read_text()
    except FileNotFoundError:
        return {}
    out = {}
    for rec in json.loads(text):
        out[(rec["n"], round(rec["rho"], 12))] = rec
    return out


def lattice_rule(n: int, s_dim: int, weights: WeightsSpec = WeightsSpec()) -> LatticeRule:
    """Searched lattice, read from the shipped cache when available.

    CBC is greedy, so the first ``s_dim`` components of a longer cached vector
    are exactly what a direct search for ``s_dim`` would return.
    """
    if n == 1:
        return LatticeRule(1, (1,) * s_dim)
    if weights.alpha == 2:
        rec = _lattice_cache().get((n, round(weights.rho, 12)))
        if rec is not None and rec["dim"] >= s_dim:
            return LatticeRule(n, tuple(rec["a"][:s_dim]))
    return lattice_search(n, s_dim, weights)
