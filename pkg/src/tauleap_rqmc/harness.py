"""Experiment grids: MC baseline, classical RQMC and Array-RQMC over a range of n.

Derived metrics:

* ``beta_hat``: minus the slope of the least-squares fit of log2 Var[mu_hat] on log2 n,
* ``vrf = mc_var / (n * var_mu_hat)``,
* ``eif = vrf * mc_time / method_time`` with times for equal n.

The MC series is not simulated per n: its variance is ``mc_var / n`` from one
large baseline run, so its fitted rate is exactly 1.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
import traceback
from dataclasses import asdict, dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np

from .arrayrqmc import ArrayRqmcPlan, run_replicated
from .chain import Functional, crqmc_estimate, mc_estimate
from .model import resolve_model
from .points import PointSet
from .sort import make_sorter

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "model",
    "g",
    "method",
    "pointset",
    "sort",
    "n",
    "m",
    "mean",
    "var_mu_hat",
    "beta_hat",
    "mc_var",
    "vrf",
    "mc_time",
    "method_time",
    "eif",
    "elapsed",
    "negative_events",
    "error",
]


@dataclass(frozen=True)
class FitResult:
    beta_hat: float
    kappa: float
    r2: float


def fit_beta(pairs: Iterable[tuple[float, float]]) -> FitResult:
    """Fit ``var ~ kappa * n**(-beta)`` by OLS in log2-log2 scale."""
    pairs = sorted((float(n), float(v)) for n, v in pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 (n, var) pairs")
    if any(n <= 0 or not v > 0 for n, v in pairs):
        raise ValueError("n and variances must be positive")
    x = np.log2([p[0] for p in pairs])
    y = np.log2([p[1] for p in pairs])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(-slope), float(2.0**intercept), r2)


def vrf(mc_var_per_run: float, n: int, var_mu_hat: float) -> float:
    if not (mc_var_per_run > 0 and n > 0 and var_mu_hat > 0):
        raise ValueError("vrf inputs must be positive")
    return mc_var_per_run / (n * var_mu_hat)


def eif(vrf_value: float, mc_time: float, method_time: float) -> float:
    if not (vrf_value > 0 and mc_time > 0 and method_time > 0):
        raise ValueError("eif inputs must be positive")
    return vrf_value * mc_time / method_time


@dataclass
class ExperimentConfig:
    """Grid description; ``n`` holds point counts (powers of 2)."""

    model: str
    g: str | list = "default"
    methods: list = field(default_factory=lambda: ["mc", "arrayrqmc"])
    points: list = field(default_factory=lambda: ["lat", "net"])
    sorts: list = field(default_factory=lambda: ["oslaif"])
    n: list = field(default_factory=lambda: [2**k for k in range(10, 17)])
    m: int = 20
    mc_n: int = 10**6
    seed: int = 12345
    n_jobs: int = 1
    timing: bool = True  # False blanks time columns so reruns are byte-identical

    def __post_init__(self):
        self.n = [int(2 ** int(v[2:])) if isinstance(v, str) and v.startswith("2^") else int(v) for v in self.n]
        if any(v < 2 for v in self.n):
            raise ValueError("all n must be >= 2")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        bad = set(self.methods) - {"mc", "crqmc", "arrayrqmc"}
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")

    @classmethod
    def from_json(cls, text_or_path) -> "ExperimentConfig":
        if os.path.exists(str(text_or_path)):
            with open(text_or_path) as fh:
                doc = json.load(fh)
        else:
            doc = json.loads(text_or_path)
        return cls(**doc)

    @classmethod
    def paper_scale(cls, model: str, **kw) -> "ExperimentConfig":
        """Full grid n = 2^13 .. 2^19, m = 100."""
        return cls(model, n=[2**k for k in range(13, 20)], m=100, **kw)


def _sort_label(spec) -> str:
    return spec if isinstance(spec, str) else json.dumps(spec, sort_keys=True)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _functionals(cfg: ExperimentConfig, net, g_default):
    if cfg.g == "default":
        return g_default
    if isinstance(cfg.g, list):
        return tuple(Functional.parse(s, net) for s in cfg.g)
    return Functional.parse(cfg.g, net)


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> list[dict]:
    """Run the grid, write ``results.csv`` and ``summary.json`` into ``out_dir``.

    A failing cell is recorded with its error message; the other cells still run.
    """
    net, x0, sim, g_default = resolve_model(cfg.model)
    g = _functionals(cfg, net, g_default)
    gs = [g] if isinstance(g, Functional) else list(g)
    names = [str(gi) for gi in gs]
    rows: list[dict] = []

    # MC baseline, once per (model, g)
    mc = mc_estimate(net, x0, sim, g, cfg.mc_n, seed=cfg.seed)
    mc_var = np.atleast_1d(mc.var_per_run)
    mc_mean = np.atleast_1d(mc.mean)
    mc_time_per_run = mc.elapsed / cfg.mc_n
    for q, name in enumerate(names):
        rows.append(
            dict(model=cfg.model, g=name, method="mc-baseline", pointset="", sort="", n=cfg.mc_n, m=1,
                 mean=float(mc_mean[q]), var_mu_hat=float(mc_var[q] / cfg.mc_n), mc_var=float(mc_var[q]),
                 vrf=1.0, mc_time=mc.elapsed, method_time=mc.elapsed, eif=1.0, elapsed=mc.elapsed,
                 negative_events=mc.negative_events)
        )
        if "mc" in cfg.methods:
            for n in cfg.n:
                t = mc_time_per_run * n
                rows.append(
                    dict(model=cfg.model, g=name, method="mc", pointset="", sort="", n=n, m=1,
                         mean=float(mc_mean[q]), var_mu_hat=float(mc_var[q] / n), mc_var=float(mc_var[q]),
                         vrf=1.0, mc_time=t, method_time=t, eif=1.0, elapsed=t, negative_events=0)
                )

    cells = []
    for method in cfg.methods:
        if method == "mc":
            continue
        for fam in cfg.points:
            sorts = cfg.sorts if method == "arrayrqmc" else [""]
            for srt in sorts:
                for n in cfg.n:
                    cells.append((method, fam, srt, n))

    for method, fam, srt, n in cells:
        label = _sort_label(srt)
        t0 = time.perf_counter()
        try:
            if method == "crqmc":
                ps = PointSet(fam, n, sim.s * net.d)
                out = crqmc_estimate(net, x0, sim, g, ps, cfg.m, seed=cfg.seed)
            else:
                sorter = make_sorter(srt, net, g, sim.tau)
                ps = PointSet(fam, n, sorter.l + net.d)
                plan = ArrayRqmcPlan(net, x0, sim, g, sorter, ps, m=cfg.m, seed=cfg.seed)
                out = run_replicated(plan, n_jobs=cfg.n_jobs)
            means = np.atleast_1d(out.mean)
            vars_ = np.atleast_1d(out.var_mu_hat)
            method_time = float(np.mean(out.times))
            for q, name in enumerate(names):
                v = float(vars_[q])
                mct = mc_time_per_run * n
                row = dict(model=cfg.model, g=name, method=method, pointset=fam, sort=label, n=n, m=out.m,
                           mean=float(means[q]), var_mu_hat=v, mc_var=float(mc_var[q]),
                           mc_time=mct, method_time=method_time, elapsed=out.elapsed,
                           negative_events=out.negative_events)
                if v > 0:
                    row["vrf"] = vrf(float(mc_var[q]), n, v)
                    row["eif"] = eif(row["vrf"], mct, method_time)
                rows.append(row)
        except Exception as exc:  # reported per cell
            log.warning("cell %s/%s/%s/n=%d failed: %s", method, fam, label, n, exc)
            for name in names:
                rows.append(dict(model=cfg.model, g=name, method=method, pointset=fam, sort=label, n=n,
                                 m=cfg.m, elapsed=time.perf_counter() - t0,
                                 error=f"{type(exc).__name__}: {exc}"))
                log.debug(traceback.format_exc())

    _attach_betas(rows)
    if not cfg.timing:
        for r in rows:
            for c in ("mc_time", "method_time", "eif", "elapsed"):
                r[c] = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summarize(rows, cfg), fh, indent=2, sort_keys=True)
    return rows


def _series_key(r):
    return (r["model"], r["g"], r["method"], r["pointset"], r["sort"])


def _attach_betas(rows: list[dict]) -> None:
    series: dict = {}
    for r in rows:
        if r["method"] == "mc-baseline" or r.get("error") or not (r.get("var_mu_hat") or 0) > 0:
            continue
        series.setdefault(_series_key(r), []).append((r["n"], r["var_mu_hat"]))
    betas = {}
    for key, pairs in series.items():
        if len(pairs) >= 3:
            betas[key] = fit_beta(pairs).beta_hat
    for r in rows:
        r["beta_hat"] = betas.get(_series_key(r))


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for c in ("n", "m", "negative_events"):
            if r.get(c):
                r[c] = int(r[c])
        for c in ("mean", "var_mu_hat", "beta_hat", "mc_var", "vrf", "mc_time", "method_time", "eif", "elapsed"):
            r[c] = float(r[c]) if r.get(c) not in (None, "") else None
    return rows


def fit_csv(path) -> list[dict]:
    """Per-series beta fits from a results CSV."""
    rows = [r for r in read_csv(path) if r["method"] != "mc-baseline" and not r.get("error")]
    rows.sort(key=_series_key)
    out = []
    for key, grp in groupby(rows, key=_series_key):
        pairs = [(r["n"], r["var_mu_hat"]) for r in grp if r["var_mu_hat"] and r["var_mu_hat"] > 0]
        if len(pairs) < 3:
            continue
        fit = fit_beta(pairs)
        out.append(dict(zip(("model", "g", "method", "pointset", "sort"), key), **asdict(fit)))
    return out


def summarize(rows: Sequence[dict], cfg: ExperimentConfig | None = None) -> dict:
    series = {}
    for r in rows:
        if r["method"] == "mc-baseline":
            continue
        key = "|".join(str(v) for v in _series_key(r))
        s = series.setdefault(key, {"beta_hat": r.get("beta_hat"), "points": []})
        s["points"].append({k: r.get(k) for k in ("n", "var_mu_hat", "vrf", "eif", "error")})
    base = [r for r in rows if r["method"] == "mc-baseline"]
    return {
        "config": asdict(cfg) if cfg is not None else None,
        "mc_baseline": [{k: r[k] for k in ("g", "n", "mean", "mc_var", "elapsed")} for r in base],
        "series": series,
    }
