#!/usr/bin/env python
# coding: utf-8

# # Experiment grids
#
# The harness runs method x point family x sort x n grids and writes a CSV with
# fitted rates, VRFs and EIFs. The same thing is available from the command
# line:
#
#     tauleap-rqmc experiment --config grid.json --out results/
#     tauleap-rqmc fit --csv results/results.csv

# In[ ]:


import tempfile

from tauleap_rqmc.harness import ExperimentConfig, fit_csv, read_csv, run_experiment

cfg = ExperimentConfig(
    "schloegl-1d",
    methods=["mc", "arrayrqmc", "crqmc"],
    points=["lat", "net"],
    n=[2**k for k in range(8, 13)],
    m=10,
    mc_n=10**5,
    seed=3,
)
out = tempfile.mkdtemp()
run_experiment(cfg, out)


# In[ ]:


for r in read_csv(f"{out}/results.csv"):
    if r["n"] == 2**12:
        print(f"{r['method']:10s} {r['pointset']:5s} mean {r['mean']:9.3f} VRF {r['vrf']:8.1f} beta {r['beta_hat']:.2f}")

for f in fit_csv(f"{out}/results.csv"):
    print(f["method"], f["pointset"], round(f["beta_hat"], 3), round(f["r2"], 3))
