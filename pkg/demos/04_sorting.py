#!/usr/bin/env python
# coding: utf-8

# # Sorting strategies for multidimensional states
#
# With more than one species the chains must still be matched to points.
# Options: map states to one dimension (OSLAIF), a batch sort that splits
# on one coordinate after another, or a Hilbert curve sort.

# In[ ]:


import numpy as np

from tauleap_rqmc.arrayrqmc import ArrayRqmcPlan, run_replicated
from tauleap_rqmc.chain import mc_estimate
from tauleap_rqmc.harness import vrf
from tauleap_rqmc.model import builtin_model
from tauleap_rqmc.points import PointSet
from tauleap_rqmc.sort import BatchSpec, batch_sort, hilbert_index, make_sorter, oslaif

net, x0, cfg, g = builtin_model("schloegl-2d")
h = oslaif(net, g, cfg.tau)
X = np.array([[250, 100_000], [300, 99_000], [200, 101_000]])
print("OSLAIF values:", h(X).round(2))


# ### Batch sort on a toy array

# In[ ]:


X = np.array([(0, 3), (1, 0), (0, 0), (1, 2)])
perm = batch_sort(X, BatchSpec((0, 1), (0.5, 0.5)))
print(X[perm].tolist())


# ### Hilbert order on a 4 x 4 grid

# In[ ]:


cells = np.array([(i, j) for i in range(4) for j in range(4)])
order = cells[np.argsort(hilbert_index(cells, 2))]
print(order.tolist())


# ## Comparing the sorts
#
# Same model, same point family, n = 2^12.

# In[ ]:


mc = mc_estimate(net, x0, cfg, g, 10**5, seed=2)
for spec in ("oslaif", "batch", "hilbert", "coordinate:0"):
    sorter = make_sorter(spec, net, g, cfg.tau)
    plan = ArrayRqmcPlan(net, x0, cfg, g, sorter, PointSet("net", 2**12, sorter.l + net.d), m=10, seed=2)
    out = run_replicated(plan)
    print(f"{spec:14s} l={sorter.l}  VRF {vrf(mc.var_per_run, plan.n, out.var_mu_hat):8.1f}")
