"""Array-RQMC: n chains advanced together, re-paired with RQMC points at every step.

At step ``j`` the states are sorted, the last ``d`` coordinates of the
(pre-ordered) points get a fresh randomization, and chain ``i`` of the new
array is ``phi(X_{pi_j(i)}, U_i)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .chain import (
    EstimatorOutput,
    Functional,
    SimConfig,
    _handle_negative,
    _summary,
    advance,
    evaluate_g,
)
from .model import ReactionNetwork
from .points import (
    DigitalNetB2,
    LatticeRule,
    MRG32k3a,
    PointSet,
    W,
    baker,
    lms_scramble,
    random_lms,
    words_to_unit,
)
from .sort import Sorter, SortError, presort_points


@dataclass
class ArrayRqmcPlan:
    """Everything needed to run Array-RQMC replications.

    ``pointset`` must have ``sorter.l + d`` dimensions. ``g`` may be one
    Functional or a sequence of them (all estimated from the same chains).
    """

    net: ReactionNetwork
    x0: np.ndarray
    config: SimConfig
    g: Functional | tuple
    sorter: Sorter
    pointset: PointSet
    m: int = 20
    seed: int | tuple = 12345

    def __post_init__(self):
        d, l = self.net.d, self.sorter.l
        if self.pointset.dim != l + d:
            raise SortError(f"point set has {self.pointset.dim} dimensions, sorter and model need l + d = {l + d}")
        self.x0 = np.asarray(self.x0, dtype=self.net.dtype)
        self._prepared = False

    @property
    def n(self) -> int:
        return self.pointset.n

    def prepare(self):
        """Pilot runs (if the sorter needs them) and point pre-ordering; done once per plan."""
        if self._prepared:
            return
        self.sorter.prepare(self.net, self.x0, self.config, self.seed)
        pts = self.pointset.construction
        l = self.sorter.l
        base = pts.points() if isinstance(pts, LatticeRule) else pts.points()
        order = self.sorter.point_order(base[:, :l]) if self.n > 1 else np.arange(self.n)
        self._order = order
        if isinstance(pts, LatticeRule):
            self._tail = np.ascontiguousarray(base[order, l:])
        self._prepared = True


def _replication_rng(seed, r: int) -> MRG32k3a:
    return MRG32k3a(seed, stream=1 + r)


def run_once(plan: ArrayRqmcPlan, replication: int = 0, trace=None):
    """One Array-RQMC estimate ``(1/n) sum_i g(X_{i,s})``.

    Returns ``(estimate, negative_events)``. ``trace``, if given, is called as
    ``trace(step, states_before, perm, U)`` after each pairing.
    """
    plan.prepare()
    net, cfg = plan.net, plan.config
    d, l, n = net.d, plan.sorter.l, plan.n
    pts = plan.pointset.construction
    kind = plan.pointset.kind
    rng = _replication_rng(plan.seed, replication)
    if isinstance(pts, DigitalNetB2):
        C = pts.C[l:]
        if kind == "lms-shift":
            C = lms_scramble(C, random_lms(rng, d, pts.w), pts.w)
        words = pts.digit_words(C)[plan._order]
    X = np.repeat(plan.x0[None, :], n, axis=0)
    neg = 0
    for j in range(cfg.s):
        perm = plan.sorter.permutation(X, j) if n > 1 else np.zeros(1, dtype=np.int64)
        if isinstance(pts, LatticeRule):
            U = (plan._tail + rng.random(d)) % 1.0
            if kind == "shift-baker":
                U = baker(U)
        else:
            U = words_to_unit(words ^ rng.randbits(d, bits=W).astype(np.int64), pts.w)
        if trace is not None:
            trace(j, X, perm, U)
        X = advance(net, X[perm], U, cfg.tau, cfg.mode)
        neg += _handle_negative(net, X, cfg, f" at step {j + 1}")
    return evaluate_g(plan.g, X).mean(axis=0), neg


def _timed(plan, r):
    t0 = time.perf_counter()
    est, neg = run_once(plan, r)
    return est, neg, time.perf_counter() - t0


def run_replicated(plan: ArrayRqmcPlan, replication_ids=None, n_jobs: int = 1) -> EstimatorOutput:
    """Mean and empirical variance of ``m`` independent Array-RQMC estimates.

    Replication ``r`` uses stream ``1 + r`` of the plan seed; passing the same
    id twice in ``replication_ids`` reuses a randomization. Results do not
    depend on ``n_jobs``.
    """
    ids = list(range(plan.m)) if replication_ids is None else list(replication_ids)
    if len(ids) < 2:
        raise ValueError("need m >= 2 replications")
    plan.prepare()
    if n_jobs == 1:
        res = [_timed(plan, r) for r in ids]
    else:
        from joblib import Parallel, delayed

        res = Parallel(n_jobs=n_jobs)(delayed(_timed)(plan, r) for r in ids)
    est = np.asarray([r[0] for r in res])
    neg = int(sum(r[1] for r in res))
    times = np.asarray([r[2] for r in res])
    out = _summary("arrayrqmc", est, plan.n, len(ids), float(times.sum()), neg, times=times)
    return out
