"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Desk scale: n <= 2^16, m = 20 for the rate fits (m = 100 for the variance
anchor and the normal-approximation grid). Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines
as they are produced; they are also collected in ``acceptance_report.txt``.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from tauleap_rqmc.arrayrqmc import ArrayRqmcPlan, run_replicated
from tauleap_rqmc.chain import Functional, mc_estimate
from tauleap_rqmc.harness import ExperimentConfig, run_experiment
from tauleap_rqmc.model import builtin_model
from tauleap_rqmc.points import PointSet
from tauleap_rqmc.sort import make_sorter

pytestmark = pytest.mark.slow

HERE = os.path.dirname(os.path.abspath(__file__))
REPORT = os.path.join(os.path.dirname(HERE), "acceptance_report.txt")
GRID = [2**k for k in range(10, 17)]
SEED = 12345
JOBS = -1  # replications in parallel where cores exist; results do not depend on it


@pytest.fixture(scope="session", autouse=True)
def _fresh_report():
    with open(REPORT, "w") as fh:
        fh.write("")
    yield


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} | {detail}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        with open(REPORT, "a") as fh:
            fh.write(line + "\n")
        return ok

    return emit


def _rows(rows, **kw):
    return [r for r in rows if all(r.get(k) == v for k, v in kw.items())]


@pytest.fixture(scope="module")
def rev_iso_grid(tmp_path_factory):
    cfg = ExperimentConfig("rev-iso", methods=["mc", "arrayrqmc", "crqmc"], points=["lat"], n=GRID, m=20,
                           mc_n=10**6, seed=SEED, n_jobs=JOBS)
    return run_experiment(cfg, tmp_path_factory.mktemp("rev_iso"))


@pytest.fixture(scope="module")
def schloegl_grid(tmp_path_factory):
    cfg = ExperimentConfig("schloegl-1d", methods=["mc", "arrayrqmc", "crqmc"], points=["net"], n=GRID, m=20,
                           mc_n=10**5, seed=SEED, n_jobs=JOBS)
    return run_experiment(cfg, tmp_path_factory.mktemp("schloegl"))


@pytest.fixture(scope="module")
def normal_grid(tmp_path_factory):
    # cheap model; m = 100 as in the reference runs, since the baker-folded
    # variance estimates are heavy tailed and m = 20 moves beta_hat by about 0.05
    cfg = ExperimentConfig("rev-iso-normal", methods=["arrayrqmc"], points=["net", "lat-baker"], n=GRID, m=100,
                           mc_n=10**5, seed=SEED, n_jobs=JOBS)
    return run_experiment(cfg, tmp_path_factory.mktemp("normal"))


# -- 1 ---------------------------------------------------------------------
def test_criterion_1_mc_baselines(report, rev_iso_grid, schloegl_grid):
    checks = []
    b = _rows(rev_iso_grid, method="mc-baseline")[0]
    se = math.sqrt(b["mc_var"] / b["n"])
    checks.append(("rev-iso", abs(b["mean"] - 100) <= 3 * se and abs(b["mc_var"] / 107.8 - 1) <= 0.10,
                   f"mean {b['mean']:.3f} (SE {se:.3f}) var {b['mc_var']:.1f}"))
    b = _rows(schloegl_grid, method="mc-baseline")[0]
    se = math.sqrt(b["mc_var"] / b["n"])
    checks.append(("schloegl-1d", abs(b["mean"] - 309.0) <= 3 * se and abs(b["mc_var"] / 44575 - 1) <= 0.10,
                   f"mean {b['mean']:.2f} (SE {se:.2f}) var {b['mc_var']:.0f}"))
    net, x0, cfg, g = builtin_model("pka")
    o = mc_estimate(net, x0, cfg, g, 10**5, seed=SEED)
    # the mean has no stated band; 1% as for the enzyme model
    checks.append(("pka", abs(o.mean / 19663 - 1) <= 0.01 and abs(o.var_per_run / 1775 - 1) <= 0.10,
                   f"mean {o.mean:.1f} var {o.var_per_run:.0f}"))
    net, x0, cfg, g = builtin_model("enzyme-qssa")
    o = mc_estimate(net, x0, cfg, g, 10**5, seed=SEED)
    # the other reading of the enzyme rates (a1 = 1) lands far away
    lit = builtin_model("enzyme-qssa", "literal")
    lit_mean = mc_estimate(lit.net, lit.x0, lit.config, lit.g, 2000, seed=SEED).mean
    checks.append(("enzyme-qssa", abs(o.mean / 61512 - 1) <= 0.01 and abs(o.var_per_run / 55398 - 1) <= 0.10,
                   f"mean {o.mean:.1f} var {o.var_per_run:.0f} with a1 = 0.5 (a1 = 1 gives mean {lit_mean:.0f})"))
    ok = all(c[1] for c in checks)
    report(1, ok, "; ".join(f"{name} {'ok' if good else 'BAD'} {txt}" for name, good, txt in checks))
    assert ok


# -- 2 ---------------------------------------------------------------------
def test_criterion_2_variance_anchor(report):
    net, x0, cfg, g = builtin_model("rev-iso")
    got = {}
    for fam, target in (("lat", -16.34), ("net", -16.56)):
        sorter = make_sorter("oslaif", net, g, cfg.tau)
        plan = ArrayRqmcPlan(net, x0, cfg, g, sorter, PointSet(fam, 2**13, sorter.l + net.d), m=100, seed=SEED)
        out = run_replicated(plan, n_jobs=JOBS)
        got[fam] = (math.log2(out.var_mu_hat), target)
    ok = all(abs(v - t) <= 0.6 for v, t in got.values())
    report(2, ok, "; ".join(f"{f}: log2 Var {v:.2f} (target {t} +- 0.6)" for f, (v, t) in got.items()))
    assert ok


# -- 3 ---------------------------------------------------------------------
def test_criterion_3_rates(report, rev_iso_grid, schloegl_grid):
    b_lat = _rows(rev_iso_grid, method="arrayrqmc", pointset="lat")[0]["beta_hat"]
    b_sob = _rows(schloegl_grid, method="arrayrqmc", pointset="net")[0]["beta_hat"]
    b_mc = [r["beta_hat"] for r in _rows(rev_iso_grid, method="mc") + _rows(schloegl_grid, method="mc")]
    ok = b_lat >= 1.5 and b_sob >= 1.3 and all(abs(b - 1.0) < 1e-9 for b in b_mc)
    report(3, ok, f"rev-iso Lat+s beta {b_lat:.3f} (>= 1.5); schloegl-1d Sob+LMS beta {b_sob:.3f} (>= 1.3); "
                  f"MC beta {b_mc[0]:.12f}")
    assert ok


# -- 4 ---------------------------------------------------------------------
def test_criterion_4_vrf_ordering(report, rev_iso_grid, schloegl_grid):
    parts, ok = [], True
    for name, rows, fam in (("rev-iso", rev_iso_grid, "lat"), ("schloegl-1d", schloegl_grid, "net")):
        a = _rows(rows, method="arrayrqmc", pointset=fam, n=2**16)[0]["vrf"]
        c = _rows(rows, method="crqmc", pointset=fam, n=2**16)[0]["vrf"]
        good = a >= 100 and a > c
        ok &= good
        parts.append(f"{name} {fam}: Array-RQMC VRF {a:.0f} vs classical {c:.1f}")
    report(4, ok, "; ".join(parts))
    assert ok


# -- 5 ---------------------------------------------------------------------
def test_criterion_5_normal_variant(report, normal_grid):
    b_sob = _rows(normal_grid, method="arrayrqmc", pointset="net")[0]["beta_hat"]
    b_bak = _rows(normal_grid, method="arrayrqmc", pointset="lat-baker")[0]["beta_hat"]
    v_bak = _rows(normal_grid, method="arrayrqmc", pointset="lat-baker", n=2**16)[0]["vrf"]
    ok = b_sob >= 1.8 and b_bak >= 1.8 and v_bak >= 1e4
    report(5, ok, f"Sob+LMS beta {b_sob:.3f}; Lat+s+b beta {b_bak:.3f} (both >= 1.8); Lat+s+b VRF(2^16) {v_bak:.0f} (>= 1e4)")
    assert ok


# -- 6 ---------------------------------------------------------------------
PROPERTY_TESTS = [
    "test_sampling.py::test_poisson_matches_bottom_up",
    "test_sampling.py::test_poisson_large_mean_matches_high_precision_oracle",
    "test_sampling.py::test_poisson_is_smallest_quantile",
    "test_points.py::test_lattice_projection_law",
    "test_points.py::test_net_projection_law_after_scramble",
    "test_points.py::test_marginal_uniformity",
    "test_points.py::test_discrepancy_product_identity_vs_subsets",
    "test_sort.py::test_importance_sort_laws",
    "test_sort.py::test_batch_sort_matches_recursive_oracle",
    "test_sort.py::test_oslaif_brute_force_small_states",
    "test_sort.py::test_hilbert_adjacency",
    "test_arrayrqmc.py::test_unbiased_on_builtins",
    "test_arrayrqmc.py::test_determinism_and_thread_count",
]


def test_criterion_6_property_suites(report):
    t0 = time.perf_counter()
    args = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"] + [os.path.join(HERE, t) for t in PROPERTY_TESTS]
    res = subprocess.run(args, capture_output=True, text=True, cwd=HERE)
    elapsed = time.perf_counter() - t0
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    ok = res.returncode == 0 and elapsed < 120
    report(6, ok, f"{summary} in {elapsed:.0f} s (< 120 s)")
    assert ok, res.stdout[-3000:]


# -- 7 ---------------------------------------------------------------------
def test_criterion_7_multi_output(report):
    net, x0, cfg, _ = builtin_model("pka")
    n, m = 2**15, 10
    gs = tuple(Functional.coordinate(i) for i in range(6))
    mc = mc_estimate(net, x0, cfg, gs, 10**5, seed=SEED)

    def vrfs(sorter):
        plan = ArrayRqmcPlan(net, x0, cfg, gs, sorter, PointSet("net", n, sorter.l + net.d), m=m, seed=SEED)
        out = run_replicated(plan, n_jobs=JOBS)
        return mc.var_per_run / (n * out.var_mu_hat)

    # Sorts adapted to each expectation. Every chain keeps x6 - 2 x5 at its
    # initial value, so OSLAIF(x6) = 2 OSLAIF(x5) + const orders chains
    # identically and the x5 run serves both.
    adapted = []
    for i in range(5):
        adapted.append(vrfs(make_sorter("oslaif", net, gs[i], cfg.tau))[i])
    adapted.append(adapted[4])
    adapted = np.array(adapted)

    shared = {
        "avg-OSLAIF": vrfs(make_sorter("oslaif", net, gs, cfg.tau)),
        "batch(1/6)": vrfs(make_sorter("batch", net)),
    }
    parts, good = [], []
    for name, v in shared.items():
        ratio = adapted.mean() / v.mean()
        g = bool(np.all(v >= 10) and 1.2 <= ratio <= 10)
        good.append(g)
        parts.append(f"{name}: min VRF {v.min():.1f}, adapted/shared mean ratio {ratio:.2f} [{'ok' if g else 'no'}]")
    ok = any(good)
    report(7, ok, f"adapted mean VRF {adapted.mean():.0f}; " + "; ".join(parts))
    assert ok
