"""Fixed-step tau-leaping chain, plain Monte Carlo and classical RQMC estimators.

One step maps a state ``x`` and ``d`` uniforms to
``x + sum_k F^{-1}_{a_k(x) tau}(u_k) zeta_k``; uniform ``k`` always drives
reaction ``k``. A path of ``s`` steps consumes ``s * d`` uniforms in
time-major, reaction-minor order.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .model import ReactionNetwork, is_valid
from .points import MRG32k3a, PointSet
from .sampling import counts

# Uniforms are clipped into the open interval before inversion.
U_MIN = 2.0**-53
U_MAX = 1.0 - 2.0**-53
MC_CHUNK = 1 << 14
PILOT_STREAM = 1 << 20


class NegativeStateError(RuntimeError):
    """Raised under ``negative_policy='abort_replication'``."""


@dataclass(frozen=True)
class SimConfig:
    T: float
    s: int
    mode: str = "integer"
    negative_policy: str = "flag_and_continue"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.s) != self.s or self.s < 0:
            raise ValueError("s must be a nonnegative integer")
        if self.mode not in ("integer", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.negative_policy not in ("flag_and_continue", "abort_replication"):
            raise ValueError(f"unknown negative policy {self.negative_policy!r}")

    @property
    def tau(self) -> float:
        return self.T / self.s if self.s else 0.0


@dataclass(frozen=True)
class Functional:
    """``g(x)``: a state coordinate, its square or cube, or an indicator ``x_i > t``."""

    kind: str  # "coordinate" | "power" | "indicator"
    i: int
    p: int = 1
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("coordinate", "power", "indicator"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "power" and self.p not in (2, 3):
            raise ValueError("power functional supports p in {2, 3}")
        if self.kind == "indicator" and int(self.threshold) != self.threshold:
            raise ValueError("indicator threshold must be an integer")

    @classmethod
    def coordinate(cls, i: int) -> "Functional":
        return cls("coordinate", i)

    @classmethod
    def power(cls, i: int, p: int) -> "Functional":
        return cls("power", i, p)

    @classmethod
    def indicator(cls, i: int, threshold) -> "Functional":
        return cls("indicator", i, 1, threshold)

    @classmethod
    def parse(cls, spec, net: ReactionNetwork | None = None) -> "Functional":
        """Parse ``"x1"``, ``"S1"``, ``"x1^2"``, ``"x1>300"`` (1-based ``x<i>``)."""
        if isinstance(spec, Functional):
            return spec
        text = str(spec).replace(" ", "")
        m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)(?:\^([23])|>(-?\d+))?", text)
        if not m:
            raise ValueError(f"cannot parse functional {spec!r}")
        name, p, thr = m.groups()
        if net is not None:
            i = net.state_index(name)
        else:
            mi = re.fullmatch(r"x(\d+)", name)
            if not mi:
                raise ValueError(f"functional {spec!r} needs a network to resolve names")
            i = int(mi.group(1)) - 1
        if p:
            return cls.power(i, int(p))
        if thr is not None:
            return cls.indicator(i, int(thr))
        return cls.coordinate(i)

    def __str__(self):
        base = f"x{self.i + 1}"
        if self.kind == "power":
            return f"{base}^{self.p}"
        if self.kind == "indicator":
            return f"{base}>{int(self.threshold)}"
        return base

    def __call__(self, x) -> np.ndarray:
        xi = np.asarray(x, dtype=np.float64)[..., self.i]
        if self.kind == "coordinate":
            return xi
        if self.kind == "power":
            return xi**self.p
        return (xi > self.threshold).astype(np.float64)


def evaluate_g(g, x) -> np.ndarray:
    """``g`` may be one Functional (result shape (n,)) or a sequence (shape (n, q))."""
    if isinstance(g, Functional):
        return g(x)
    return np.stack([gi(x) for gi in g], axis=-1)


@dataclass
class EstimatorOutput:
    """Result of an estimator run.

    ``var_per_run`` is the per-run variance (for RQMC methods the equivalent
    ``n * var_mu_hat``) and ``var_mu_hat`` the variance of the mean.
    """

    method: str
    mean: np.ndarray | float
    var_per_run: np.ndarray | float
    var_mu_hat: np.ndarray | float
    n: int
    m: int
    elapsed: float
    negative_events: int = 0
    estimates: np.ndarray | None = field(default=None, repr=False)
    times: np.ndarray | None = field(default=None, repr=False)

    @property
    def se(self):
        return np.sqrt(self.var_mu_hat / max(self.m, 1)) if self.m > 1 else np.sqrt(self.var_mu_hat)


class StepResult(NamedTuple):
    x: np.ndarray
    negative_events: int


def advance(net: ReactionNetwork, X: np.ndarray, U: np.ndarray, tau: float, mode: str | None = None) -> np.ndarray:
    """One tau-leap step for states ``X`` (n, l) with uniforms ``U`` (n, d)."""
    mode = mode or net.mode
    lam = net.propensities(X) * tau
    U = np.clip(U, U_MIN, U_MAX)
    D = counts(lam, U, mode)
    out = X + D @ net.zeta
    return out.astype(net.dtype, copy=False)


def _negatives(net, X) -> int:
    return int(np.count_nonzero(~is_valid(net, X)))


def _handle_negative(net, X, config, where=""):
    neg = _negatives(net, X)
    if neg and config.negative_policy == "abort_replication":
        bad = X[~is_valid(net, X)][0]
        raise NegativeStateError(f"negative copy number {bad}{where}")
    return neg


def step(net: ReactionNetwork, x, u, tau: float, config: SimConfig | None = None) -> StepResult:
    """Single-state transition ``phi(x, u)``."""
    x = np.asarray(x)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (net.d,):
        raise ValueError(f"need {net.d} uniforms, got shape {u.shape}")
    if np.any(~(u > 0)) or np.any(~(u < 1)):
        raise ValueError("uniforms must lie in (0, 1)")
    config = config or SimConfig(T=max(tau, 1e-300), s=1, mode=net.mode)
    new = advance(net, x[None, :], u[None, :], tau, config.mode)
    neg = _handle_negative(net, new, config)
    return StepResult(new[0], neg)


def simulate_path(net: ReactionNetwork, x0, config: SimConfig, coords) -> StepResult:
    """One path of ``s`` steps. ``coords`` is an (s, d) array, a flat s*d vector or a callable j -> d-vector."""
    x = np.asarray(x0, dtype=net.dtype)
    neg = 0
    if callable(coords):
        get = coords
    else:
        arr = np.asarray(coords, dtype=np.float64).reshape(config.s, net.d) if config.s else None
        get = lambda j: arr[j]  # noqa: E731
    for j in range(config.s):
        x = advance(net, x[None, :], np.asarray(get(j))[None, :], config.tau, config.mode)[0]
        neg += _handle_negative(net, x[None, :], config, f" at step {j + 1}")
    return StepResult(x, neg)


def simulate_paths(
    net: ReactionNetwork, x0, config: SimConfig, source: Callable[[int], np.ndarray] | np.ndarray, n: int | None = None
) -> StepResult:
    """``n`` independent paths. ``source(j)`` gives the (n, d) uniforms of step ``j``,
    or pass an (n, s*d) array."""
    if not callable(source):
        arr = np.asarray(source, dtype=np.float64)
        n = arr.shape[0]
        if arr.shape[1] < config.s * net.d:
            raise ValueError(f"point dimension {arr.shape[1]} < s*d = {config.s * net.d}")
        d = net.d
        source = lambda j: arr[:, j * d : (j + 1) * d]  # noqa: E731
    X = np.repeat(np.asarray(x0, dtype=net.dtype)[None, :], n, axis=0)
    neg = 0
    for j in range(config.s):
        X = advance(net, X, source(j), config.tau, config.mode)
        neg += _handle_negative(net, X, config, f" at step {j + 1}")
    return StepResult(X, neg)


def _summary(method, values, n, m, elapsed, neg, estimates=None, times=None, per_run=False):
    if per_run:
        mean = values.mean(axis=0)
        var = values.var(axis=0, ddof=1)
        return EstimatorOutput(method, mean, var, var / n, n, m, elapsed, neg, estimates, times)
    mean = values.mean(axis=0)
    var_mu = values.var(axis=0, ddof=1)
    return EstimatorOutput(method, mean, var_mu * n, var_mu, n, m, elapsed, neg, values, times)


def mc_paths(net, x0, config, n, seed, stream: int = 0, chunk: int = MC_CHUNK):
    """Final states of ``n`` MC paths; chunk ``c`` draws from substream ``c``.

    Yields (X_chunk, negative_events) so callers can reduce on the fly.
    """
    base = MRG32k3a(seed, stream=stream)
    for c, start in enumerate(range(0, n, chunk)):
        size = min(chunk, n - start)
        rng = base.spawn(c)
        X, neg = simulate_paths(net, x0, config, lambda j: rng.random((size, net.d)), size)
        yield X, neg


def mc_estimate(net, x0, config: SimConfig, g, n: int, seed=12345, stream: int = 0) -> EstimatorOutput:
    """Plain Monte Carlo: mean and unbiased per-run variance of ``g(X_s)``."""
    if n < 2:
        raise ValueError("MC needs n >= 2")
    t0 = time.perf_counter()
    vals = []
    neg = 0
    for X, ng in mc_paths(net, x0, config, n, seed, stream):
        vals.append(evaluate_g(g, X))
        neg += ng
    vals = np.concatenate(vals)
    return _summary("mc", vals, n, 1, time.perf_counter() - t0, neg, per_run=True)


def crqmc_estimate(
    net,
    x0,
    config: SimConfig,
    g,
    pointset: PointSet,
    m: int,
    seed=12345,
    replication_ids: Sequence[int] | None = None,
) -> EstimatorOutput:
    """Classical RQMC: each path is driven by one point of an ``s*d``-dim randomized set.

    Replication ``r`` draws its randomization from stream ``1 + r`` of ``seed``;
    ``replication_ids`` overrides ``r`` (equal ids give equal randomizations).
    """
    sd = config.s * net.d
    if pointset.dim < sd:
        raise ValueError(f"point set has {pointset.dim} dimensions, need s*d = {sd}")
    ids = list(range(m)) if replication_ids is None else list(replication_ids)
    if len(ids) < 2:
        raise ValueError("need m >= 2 replications")
    n = pointset.n
    est, times, neg = [], [], 0
    for r in ids:
        t0 = time.perf_counter()
        rng = MRG32k3a(seed, stream=1 + r)
        rz = pointset.new_randomization(rng, sd)
        d = net.d
        X, ng = simulate_paths(net, x0, config, lambda j: pointset.block(rz, j * d, (j + 1) * d), n)
        est.append(evaluate_g(g, X).mean(axis=0))
        neg += ng
        times.append(time.perf_counter() - t0)
    est = np.asarray(est)
    times = np.asarray(times)
    return _summary("crqmc", est, n, len(ids), float(times.sum()), neg, times=times)
