"""Command-line entry point: ``tauleap-rqmc {simulate,experiment,points,fit}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np


def _n_arg(text: str) -> int:
    """``k`` means n = 2**k; ``2^k`` is accepted as well."""
    k = int(text[2:]) if text.startswith("2^") else int(text)
    if not 0 <= k <= 40:
        raise argparse.ArgumentTypeError("--n takes log2 of the point count (0..40)")
    return 1 << k


def cmd_simulate(args) -> int:
    from .arrayrqmc import ArrayRqmcPlan, run_replicated
    from .chain import Functional, SimConfig, crqmc_estimate, mc_estimate
    from .model import resolve_model
    from .points import PointSet
    from .sort import make_sorter

    net, x0, sim, g = resolve_model(args.model)
    if args.g:
        parts = args.g.split(",")
        g = Functional.parse(parts[0], net) if len(parts) == 1 else tuple(Functional.parse(p, net) for p in parts)
    if args.T or args.s:
        sim = SimConfig(T=args.T or sim.T, s=args.s or sim.s, mode=sim.mode, negative_policy=args.negative_policy)
    elif args.negative_policy != sim.negative_policy:
        sim = SimConfig(sim.T, sim.s, sim.mode, args.negative_policy)
    n = args.n
    if args.method == "mc":
        out = mc_estimate(net, x0, sim, g, n, seed=args.seed)
    elif args.method == "crqmc":
        out = crqmc_estimate(net, x0, sim, g, PointSet(args.points, n, sim.s * net.d), args.m, seed=args.seed)
    else:
        sort_spec = json.loads(args.sort) if args.sort.startswith("{") else args.sort
        sorter = make_sorter(sort_spec, net, g, sim.tau)
        plan = ArrayRqmcPlan(net, x0, sim, g, sorter, PointSet(args.points, n, sorter.l + net.d), args.m, args.seed)
        out = run_replicated(plan, n_jobs=args.jobs)
    doc = {
        "model": args.model,
        "method": out.method,
        "n": out.n,
        "m": out.m,
        "mean": np.atleast_1d(out.mean).tolist(),
        "var_per_run": np.atleast_1d(out.var_per_run).tolist(),
        "var_mu_hat": np.atleast_1d(out.var_mu_hat).tolist(),
        "elapsed": out.elapsed,
        "negative_events": out.negative_events,
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_experiment(args) -> int:
    from .harness import ExperimentConfig, run_experiment

    cfg = ExperimentConfig.from_json(args.config)
    rows = run_experiment(cfg, args.out)
    failed = sum(1 for r in rows if r.get("error"))
    print(f"wrote {len(rows)} rows to {args.out} ({failed} failed cells)")
    return 1 if failed else 0


def cmd_points(args) -> int:
    from .points import (
        DigitalNetB2,
        LatticeRule,
        WeightsSpec,
        make_points,
        p_alpha_discrepancy,
    )

    w = WeightsSpec(args.rho)
    pts = make_points(args.family, args.n, args.dim, w)
    doc = {"family": args.family, "n": args.n, "dim": args.dim}
    if isinstance(pts, LatticeRule):
        doc.update(rho=args.rho, a=list(pts.a))
        if args.criterion:
            doc["p2_discrepancy"] = p_alpha_discrepancy(pts, w)
    elif isinstance(pts, DigitalNetB2):
        doc["first_points"] = pts.points()[: min(8, pts.n)].tolist()
        if args.criterion:
            print("note: the P2 criterion is only defined here for lattices", file=sys.stderr)
    print(json.dumps(doc, indent=2))
    return 0


def cmd_fit(args) -> int:
    from .harness import fit_csv

    fits = fit_csv(args.csv)
    for f in fits:
        print(f"{f['model']},{f['g']},{f['method']},{f['pointset']},{f['sort']}: "
              f"beta_hat={f['beta_hat']:.3f} kappa={f['kappa']:.4g} r2={f['r2']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tauleap-rqmc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="one estimator run")
    s.add_argument("--model", required=True, help="built-in name or network JSON path")
    s.add_argument("--g", default=None, help="functional, e.g. x1, x1^2, x1>300 (comma list for several)")
    s.add_argument("--method", choices=["mc", "crqmc", "arrayrqmc"], default="arrayrqmc")
    s.add_argument("--points", choices=["lat", "lat-baker", "net"], default="lat")
    s.add_argument("--sort", default="oslaif", help="oslaif | coordinate:<i> | batch:<i,j> | hilbert | JSON")
    s.add_argument("--n", type=_n_arg, default=1 << 12, help="log2 of the number of points/paths")
    s.add_argument("--m", type=int, default=20)
    s.add_argument("--seed", type=int, default=12345)
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--s", type=int, default=None)
    s.add_argument("--negative-policy", choices=["flag_and_continue", "abort_replication"], default="flag_and_continue")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a grid from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_experiment)

    q = sub.add_parser("points", help="construct a point set")
    q.add_argument("--family", choices=["lat", "lat-baker", "net"], default="lat")
    q.add_argument("--n", type=int, required=True, help="number of points")
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--rho", type=float, default=0.6)
    q.add_argument("--criterion", action="store_true", help="also report the weighted P2 discrepancy")
    q.set_defaults(func=cmd_points)

    f = sub.add_parser("fit", help="fit convergence rates from a results CSV")
    f.add_argument("--csv", required=True)
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
