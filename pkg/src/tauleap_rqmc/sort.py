"""State orderings for Array-RQMC.

Every sorter exposes

* ``l``: number of leading point coordinates used for sorting,
* ``point_order(P)``: ordering of the points from their first ``l`` coordinates,
* ``permutation(X, step)``: ordering of the chain states before ``step``.

The ``i``-th state in state order is paired with the ``i``-th point in point
order. All orderings are stable, ties go to the lower original index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .chain import PILOT_STREAM, Functional, SimConfig, advance
from .model import ReactionNetwork
from .points import MRG32k3a

SIGMA_FLOOR = 1e-9
DEFAULT_PILOT_N = 1 << 12


class SortError(ValueError):
    pass


# -- importance functions --------------------------------------------------
@dataclass(frozen=True, eq=False)
class ImportanceFunction:
    """``h(X)`` on a batch of states. ``key`` is an increasing transform of ``h``
    that is used for sorting when ``h`` itself saturates numerically."""

    h: Callable[[np.ndarray], np.ndarray]
    key: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "h"
    l: int = field(default=1, init=False)

    def __call__(self, X) -> np.ndarray:
        return self.h(np.asarray(X))

    def sort_key(self, X) -> np.ndarray:
        return (self.key or self.h)(np.asarray(X))


def coordinate_importance(i: int) -> ImportanceFunction:
    return ImportanceFunction(lambda X: np.asarray(X[..., i], dtype=np.float64), name=f"x{i + 1}")


def _one_step_cumulants(net: ReactionNetwork, X, i: int, tau: float):
    lam = net.propensities(X) * tau
    z = net.zeta[:, i].astype(np.float64)
    M = lam @ z
    V = lam @ (z * z)
    K3 = lam @ (z**3) if net.mode == "integer" else np.zeros_like(M)
    return M, V, K3


def oslaif(net: ReactionNetwork, g: Functional, tau: float) -> ImportanceFunction:
    """One-step look-ahead importance function ``h(x) = E[g(X_1) | X_0 = x]``.

    Coordinate and power functionals are exact (the one-step increment of
    coordinate ``i`` is a sum of independent scaled Poisson counts, or normals
    in real mode). Indicators ``1[x_i > t]`` use a continuity-corrected normal
    tail of the one-step distribution.
    """
    i = g.i
    if g.kind == "coordinate":

        def h(X):
            M, _, _ = _one_step_cumulants(net, X, i, tau)
            return np.asarray(X[..., i], dtype=np.float64) + M

        return ImportanceFunction(h, name=f"oslaif(x{i + 1})")
    if g.kind == "power":
        p = g.p

        def h(X):
            M, V, K3 = _one_step_cumulants(net, X, i, tau)
            mu = np.asarray(X[..., i], dtype=np.float64) + M
            if p == 2:
                return mu * mu + V
            return mu**3 + 3.0 * mu * V + K3

        return ImportanceFunction(h, name=f"oslaif(x{i + 1}^{p})")
    if g.kind == "indicator":
        cc = 0.5 if net.mode == "integer" else 0.0
        t = float(g.threshold)

        def z(X):
            M, V, _ = _one_step_cumulants(net, X, i, tau)
            mu = np.asarray(X[..., i], dtype=np.float64) + M
            sd = np.sqrt(V)
            with np.errstate(divide="ignore", invalid="ignore"):
                zz = (mu - t - cc) / sd
            # no noise: the tail is a step function of the mean
            return np.where(sd > 0, zz, np.where(mu > t + cc, np.inf, -np.inf))

        return ImportanceFunction(
            lambda X: ndtr(z(X)),
            key=lambda X: np.clip(log_ndtr(z(X)), -1e300, 0.0),
            name=f"oslaif(x{i + 1}>{int(t)})",
        )
    raise SortError(f"unsupported functional kind {g.kind!r}")


def average_importance(hs: Sequence[ImportanceFunction]) -> ImportanceFunction:
    """Mean of several importance functions (one shared sort for several outputs)."""
    hs = list(hs)
    if not hs:
        raise SortError("need at least one importance function")
    return ImportanceFunction(
        lambda X: sum(h(X) for h in hs) / len(hs), name="avg(" + ",".join(h.name for h in hs) + ")"
    )


def sort_by_importance(states, h) -> np.ndarray:
    """Stable ascending order of ``h`` over the states."""
    key = h.sort_key(states) if isinstance(h, ImportanceFunction) else np.asarray(h(states), dtype=np.float64)
    bad = ~np.isfinite(key)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise SortError(f"non-finite importance value {key[j]} at state {np.asarray(states)[j]}")
    return np.argsort(key, kind="stable")


# -- batch sort ------------------------------------------------------------
@dataclass(frozen=True)
class BatchSpec:
    coord_order: tuple[int, ...]
    exponents: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coord_order", tuple(int(c) for c in self.coord_order))
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))
        if len(self.coord_order) != len(self.exponents) or not self.coord_order:
            raise SortError("coord_order and exponents must be nonempty and of equal length")
        if any(a <= 0 for a in self.exponents):
            raise SortError("batch exponents must be positive")
        if abs(sum(self.exponents) - 1.0) > 1e-9:
            raise SortError(f"batch exponents must sum to 1, got {sum(self.exponents)}")

    @property
    def L(self) -> int:
        return len(self.coord_order)

    @classmethod
    def uniform(cls, coords: Sequence[int]) -> "BatchSpec":
        return cls(tuple(coords), tuple([1.0 / len(coords)] * len(coords)))

    def batch_counts(self, n: int) -> list[int]:
        return [math.ceil(n**a - 1e-9) for a in self.exponents]

    def block_sizes(self, n: int) -> list[int]:
        """b_0 = n, b_j = ceil(b_{j-1} / n_j)."""
        sizes = [n]
        for nj in self.batch_counts(n):
            sizes.append(-(-sizes[-1] // nj))
        return sizes


def batch_sort(states, spec: BatchSpec, n: int | None = None) -> np.ndarray:
    """Recursive batch sort: blocks by the first coordinate, then within blocks by the next."""
    X = np.asarray(states)
    n = X.shape[0] if n is None else n
    if X.shape[0] != n:
        raise SortError("n does not match the number of states")
    for c in spec.coord_order:
        if not 0 <= c < X.shape[1]:
            raise SortError(f"batch coordinate {c} out of range for {X.shape[1]}-dimensional states")
    sizes = spec.block_sizes(n)
    perm = np.arange(n)
    block = np.zeros(n, dtype=np.int64)
    offset = np.arange(n)
    for lev, c in enumerate(spec.coord_order):
        keys = X[perm, c]
        order = np.lexsort((perm, keys, block))
        perm = perm[order]
        # blocks are contiguous and keep their positions, so offsets are unchanged
        b_next = sizes[lev + 1]
        sub = offset // b_next
        fan = -(-sizes[lev] // b_next) + 1
        block = block * fan + sub
        offset = offset - sub * b_next
    return perm


# -- Hilbert sort ----------------------------------------------------------
def logistic_map(x, mu, sigma):
    """Psi(x) = 1 / (1 + exp(-(x - mu + 2 sigma) / (4 sigma))), clipped inside (0, 1)."""
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    v = expit((np.asarray(x, dtype=np.float64) - mu + 2.0 * sigma) / (4.0 * sigma))
    return np.clip(v, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def default_bits(n: int, ell: int) -> int:
    return min(math.ceil(math.log2(max(n, 2)) / ell) + 4, 62 // ell)


def hilbert_index(cells, bits: int) -> np.ndarray:
    """Hilbert index of integer cells (n, ell) on a ``2**bits`` grid (Skilling's transform)."""
    X = np.array(cells, dtype=np.int64, copy=True)
    if X.ndim == 1:
        X = X[None, :]
    n, ell = X.shape
    if bits * ell > 62:
        raise SortError(f"grid overflow: bits*ell = {bits * ell} > 62")
    if np.any(X < 0) or np.any(X >= (1 << bits)):
        raise SortError("cell coordinates outside the grid")
    X = X.T.copy()  # (ell, n)
    M = 1 << (bits - 1)
    Q = M
    while Q > 1:
        P = Q - 1
        for i in range(ell):
            hit = (X[i] & Q) != 0
            X[0] = np.where(hit, X[0] ^ P, X[0])
            t = np.where(hit, 0, (X[0] ^ X[i]) & P)
            X[0] ^= t
            X[i] ^= t
        Q >>= 1
    for i in range(1, ell):
        X[i] ^= X[i - 1]
    t = np.zeros(n, dtype=np.int64)
    Q = M
    while Q > 1:
        t = np.where((X[ell - 1] & Q) != 0, t ^ (Q - 1), t)
        Q >>= 1
    X ^= t
    h = np.zeros(n, dtype=np.int64)
    for b in range(bits - 1, -1, -1):
        for i in range(ell):
            h = (h << 1) | ((X[i] >> b) & 1)
    return h


@dataclass(frozen=True, eq=False)
class HilbertSpec:
    """Per-step logistic statistics ``mu[j], sigma[j]`` (shape (s+1, ell)) and grid bits."""

    mu: np.ndarray
    sigma: np.ndarray
    bits: int | None = None

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu, dtype=np.float64))
        sg = np.maximum(np.atleast_2d(np.asarray(self.sigma, dtype=np.float64)), SIGMA_FLOOR)
        if mu.shape != sg.shape:
            raise SortError("mu and sigma shapes differ")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sg)
        if self.bits is not None and self.bits * mu.shape[1] > 62:
            raise SortError(f"grid overflow: bits*ell = {self.bits * mu.shape[1]} > 62")


def hilbert_keys(states, spec: HilbertSpec, step: int = 0) -> np.ndarray:
    X = np.asarray(states, dtype=np.float64)
    n, ell = X.shape
    if ell < 2:
        raise SortError("Hilbert sort needs at least 2 state dimensions; use an importance sort")
    bits = spec.bits or default_bits(n, ell)
    j = min(step, spec.mu.shape[0] - 1)
    psi = logistic_map(X, spec.mu[j], spec.sigma[j])
    cells = np.minimum(np.floor(psi * (1 << bits)).astype(np.int64), (1 << bits) - 1)
    return hilbert_index(cells, bits)


def hilbert_sort(states, spec: HilbertSpec, step: int = 0) -> np.ndarray:
    return np.argsort(hilbert_keys(states, spec, step), kind="stable")


def pilot_stats(net: ReactionNetwork, x0, config: SimConfig, n_pilot: int = DEFAULT_PILOT_N, seed=12345):
    """Per-step mean and SD (floored) of each state coordinate over ``n_pilot`` MC paths.

    Returns arrays of shape (s+1, l); row ``j`` describes the states after ``j`` steps.
    """
    if n_pilot < 2:
        raise ValueError("n_pilot must be at least 2")
    rng = MRG32k3a(seed, stream=PILOT_STREAM)
    X = np.repeat(np.asarray(x0, dtype=net.dtype)[None, :], n_pilot, axis=0)
    mu = [X.mean(axis=0)]
    sd = [np.maximum(X.std(axis=0, ddof=1), SIGMA_FLOOR)]
    for _ in range(config.s):
        X = advance(net, X, rng.random((n_pilot, net.d)), config.tau, config.mode)
        mu.append(X.mean(axis=0))
        sd.append(np.maximum(X.std(axis=0, ddof=1), SIGMA_FLOOR))
    return np.array(mu), np.array(sd)


# -- sorter strategies -----------------------------------------------------
class Sorter:
    l = 1
    name = "sorter"

    def prepare(self, net, x0, config, seed) -> None:
        """Hook for sorters that need pilot runs."""

    def point_order(self, P) -> np.ndarray:
        """Order points by their first coordinate (identity when it is i/n)."""
        return np.argsort(np.asarray(P)[:, 0], kind="stable")

    def permutation(self, states, step: int) -> np.ndarray:
        raise NotImplementedError


class ImportanceSorter(Sorter):
    def __init__(self, h: ImportanceFunction):
        self.h = h
        self.name = h.name

    def permutation(self, states, step):
        return sort_by_importance(states, self.h)


class BatchSorter(Sorter):
    def __init__(self, spec: BatchSpec):
        self.spec = spec
        self.l = spec.L
        self.name = f"batch{list(spec.coord_order)}"

    def point_order(self, P):
        P = np.asarray(P)
        if P.shape[1] < self.l:
            raise SortError(f"batch sort needs {self.l} point coordinates")
        return batch_sort(P[:, : self.l], BatchSpec(tuple(range(self.l)), self.spec.exponents))

    def permutation(self, states, step):
        return batch_sort(states, self.spec)


class HilbertSorter(Sorter):
    def __init__(self, spec: HilbertSpec | None = None, bits: int | None = None, pilot_n: int = DEFAULT_PILOT_N):
        self.spec = spec
        self.bits = bits
        self.pilot_n = pilot_n
        self.name = "hilbert"

    def prepare(self, net, x0, config, seed):
        if self.spec is None:
            mu, sd = pilot_stats(net, x0, config, self.pilot_n, seed)
            self.spec = HilbertSpec(mu, sd, self.bits)

    def permutation(self, states, step):
        if self.spec is None:
            raise SortError("Hilbert sorter has no statistics; call prepare() first")
        return hilbert_sort(states, self.spec, step)


def presort_points(P, sorter: Sorter, d: int | None = None) -> np.ndarray:
    """Reorder points ``P`` (n, l + d) so that their first ``l`` coordinates follow the sorter."""
    P = np.asarray(P)
    if d is not None and P.shape[1] != sorter.l + d:
        raise SortError(f"point dimension {P.shape[1]} != l + d = {sorter.l + d}")
    if P.shape[1] < sorter.l:
        raise SortError("point set has fewer coordinates than the sorter uses")
    return P[sorter.point_order(P)]


def make_sorter(config, net: ReactionNetwork, g=None, tau: float | None = None) -> Sorter:
    """Sorter from a JSON-like dict or short string.

    Strings: ``"oslaif"``, ``"coordinate:<i>"``, ``"batch:<i,j,...>"``, ``"hilbert"``.
    """
    if isinstance(config, Sorter):
        return config
    if isinstance(config, str):
        kind, _, arg = config.partition(":")
        config = {"kind": kind}
        if kind == "coordinate" and arg:
            config["coord"] = arg
        elif kind == "batch" and arg:
            config["order"] = arg.split(",")
        elif kind == "oslaif" and arg:
            config["coord"] = arg.split(",")
    kind = config.get("kind")
    if kind == "oslaif":
        if tau is None:
            raise SortError("OSLAIF needs the step size")
        targets = config.get("coord")
        if targets is None:
            gs = [g] if isinstance(g, Functional) else list(g)
        else:
            targets = targets if isinstance(targets, list) else [targets]
            gs = [Functional.parse(t if isinstance(t, str) else f"x{int(t) + 1}", net) for t in targets]
        hs = [oslaif(net, gi, tau) for gi in gs]
        return ImportanceSorter(hs[0] if len(hs) == 1 else average_importance(hs))
    if kind == "coordinate":
        c = config.get("coord", 0)
        return ImportanceSorter(coordinate_importance(net.state_index(c if not isinstance(c, str) or not c.isdigit() else int(c))))
    if kind == "batch":
        order = config.get("order") or list(range(net.l))
        order = [net.state_index(int(o) if isinstance(o, str) and o.isdigit() else o) for o in order]
        exps = config.get("exponents") or [1.0 / len(order)] * len(order)
        return BatchSorter(BatchSpec(tuple(order), tuple(exps)))
    if kind == "hilbert":
        return HilbertSorter(bits=config.get("bits"), pilot_n=config.get("pilot_n", DEFAULT_PILOT_N))
    raise SortError(f"unknown sorter kind {kind!r}")
