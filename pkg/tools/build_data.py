"""Regenerate the package data files.

* ``lattices.json``: CBC lattice vectors for n = 2**4 .. 2**19, rho = 0.6.
* ``joe_kuo_21201.txt.gz``: direction numbers in the Joe-Kuo text format,
  converted from the table that ships with SciPy.
"""

import argparse
import gzip
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "tauleap_rqmc" / "data"


def build_direction_numbers():
    import scipy.stats

    npz = Path(scipy.stats.__file__).parent / "_sobol_direction_numbers.npz"
    z = np.load(npz)
    vinit, poly = z["vinit"], z["poly"]
    lines = ["d s a m_i"]
    for j in range(1, poly.size):
        p = int(poly[j])
        s = p.bit_length() - 1
        a = (p >> 1) & ((1 << (s - 1)) - 1)
        m = " ".join(str(int(v)) for v in vinit[j, :s])
        lines.append(f"{j + 1} {s} {a} {m}")
    with gzip.open(DATA / "joe_kuo_21201.txt.gz", "wt") as fh:
        fh.write("\n".join(lines) + "\n")


def build_lattices(kmax, dim):
    from tauleap_rqmc.points.lattice import WeightsSpec, lattice_search

    recs = []
    for k in range(4, kmax + 1):
        rule = lattice_search(2**k, dim, WeightsSpec(0.6))
        recs.append({"n": 2**k, "dim": dim, "rho": 0.6, "a": list(rule.a)})
        print(k, rule.a, flush=True)
    (DATA / "lattices.json").write_text(json.dumps(recs, indent=1) + "\n")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--kmax", type=int, default=19)
    ap.add_argument("--dim", type=int, default=12)
    ap.add_argument("--skip-lattices", action="store_true")
    args = ap.parse_args()
    build_direction_numbers()
    if not args.skip_lattices:
        build_lattices(args.kmax, args.dim)
