"""Independent reference implementations used by the tests.

These are deliberately naive: loops, exact arithmetic and enumeration, with
no code shared with the package.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath


# -- MRG32k3a, straight from the recurrence ---------------------------------
class RefMRG32k3a:
    m1 = 4294967087
    m2 = 4294944443

    def __init__(self, seed=(12345,) * 6):
        self.s = list(seed)

    def next(self) -> float:
        s = self.s
        p1 = (1403580 * s[1] - 810728 * s[0]) % self.m1
        p2 = (527612 * s[5] - 1370589 * s[3]) % self.m2
        self.s = [s[1], s[2], p1, s[4], s[5], p2]
        diff = p1 - p2 if p1 > p2 else p1 - p2 + self.m1
        return diff * 2.328306549295727688e-10


# -- Poisson ---------------------------------------------------------------
def poisson_bottom_up(lam: float, u: float) -> int:
    """Smallest x with F(x) >= u by summing the pmf from 0 (double precision)."""
    if lam == 0:
        return 0
    x, p = 0, math.exp(-lam)
    F = p
    while F < u:
        x += 1
        p *= lam / x
        F += p
    return x


def poisson_bottom_up_mp(lam: float, us, dps: int = 40):
    """Bottom-up CDF accumulation in high precision; works for large means."""
    mpmath.mp.dps = dps
    lam_m = mpmath.mpf(lam)
    targets = sorted((mpmath.mpf(u), k) for k, u in enumerate(us))
    out = [None] * len(us)
    x, p = 0, mpmath.exp(-lam_m)
    F = p
    for u, k in targets:
        while F < u:
            x += 1
            p = p * lam_m / x
            F += p
        out[k] = x
    return out


def normal_quantile_bisect(u: float) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2)) < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- combinatorics ---------------------------------------------------------
def mass_action_enumerated(c, alpha, x) -> float:
    """c times the number of ways to pick alpha_i unordered molecules of each species."""
    total = 1
    for a, xi in zip(alpha, x):
        total *= sum(1 for _ in itertools.combinations(range(xi), a))
    return c * total


# -- lattice discrepancy ---------------------------------------------------
def bernoulli2(u):
    return u * u - u + Fraction(1, 6)


def p2_subset_sum(n: int, a, rho) -> float:
    """sum over nonempty subsets u of rho^|u| (1/n) sum_i prod_{j in u} phi(u_ij), exact rationals times pi^2."""
    dim = len(a)
    pts = [[Fraction(i * aj % n, n) for aj in a] for i in range(n)]
    total = 0.0
    for size in range(1, dim + 1):
        for sub in itertools.combinations(range(dim), size):
            acc = 0.0
            for p in pts:
                prod = 1.0
                for j in sub:
                    prod *= 2 * math.pi**2 * float(bernoulli2(p[j]))
                acc += prod
            total += rho**size * acc / n
    return total


# -- one-step expectations -------------------------------------------------
def poisson_support(lam, tail=1e-12):
    """(k, pmf) pairs covering all but ``tail`` of the mass."""
    out, k, p, acc = [], 0, math.exp(-lam), 0.0
    while True:
        out.append((k, p))
        acc += p
        if acc > 1 - tail and k > lam:
            return out
        k += 1
        p *= lam / k


def one_step_moment_enumerated(lams, zeta_col, x_i, power):
    """E[(x_i + sum_k zeta_k D_k)^power] with independent Poisson D_k, by enumeration."""
    supports = [poisson_support(l) if l > 0 else [(0, 1.0)] for l in lams]
    total = 0.0
    for combo in itertools.product(*supports):
        prob = 1.0
        val = x_i
        for (k, p), z in zip(combo, zeta_col):
            prob *= p
            val += z * k
        total += prob * val**power
    return total


# -- sorting ---------------------------------------------------------------
def batch_sort_recursive(states, coords, exponents, n):
    """Direct recursive statement of the batch sort on index lists."""
    counts = [math.ceil(n**a - 1e-9) for a in exponents]

    def rec(idx, level, size):
        if level == len(coords):
            return idx
        c = coords[level]
        idx = sorted(idx, key=lambda i: (states[i][c], i))
        b = -(-size // counts[level])
        out = []
        for start in range(0, len(idx), b):
            out.extend(rec(idx[start : start + b], level + 1, b))
        return out

    return rec(list(range(n)), 0, n)


def hilbert_d2xy(order_bits: int, d: int):
    """Classic iterative Hilbert d -> (x, y) for a 2**bits grid (Wikipedia form)."""
    n = 1 << order_bits
    x = y = 0
    s = 1
    t = d
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y
