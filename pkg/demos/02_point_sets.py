#!/usr/bin/env python
# coding: utf-8

# # RQMC point sets
#
# Two families: rank-1 lattices found by a component-by-component search on a
# weighted P2 criterion, and Sobol' digital nets. Each is randomized so that
# every point is uniform while the set keeps its structure.

# In[ ]:


import numpy as np

from tauleap_rqmc.points import (
    DigitalNetB2,
    LatticeRule,
    MRG32k3a,
    PointSet,
    WeightsSpec,
    baker,
    korobov,
    lattice_search,
    p_alpha_discrepancy,
)

rule = lattice_search(1024, 4, WeightsSpec(rho=0.6))
print(rule.a)
print("CBC   :", p_alpha_discrepancy(rule))
print("Korobov:", p_alpha_discrepancy(korobov(1024, 4)))


# Every one-dimensional projection of a lattice or net with n points holds
# exactly one point per interval [i/n, (i+1)/n).

# In[ ]:


P = rule.points()
print(np.array_equal(np.sort(P[:, 2]), np.arange(1024) / 1024))

net = DigitalNetB2.sobol(10, 4)
Q = net.points()
print(sorted(np.floor(Q[:, 3] * 1024).astype(int)) == list(range(1024)))


# ## Randomizations
#
# Lattices get a random shift modulo 1, optionally folded by the baker map.
# Nets get a left matrix scramble followed by a digital (XOR) shift.

# In[ ]:


rng = MRG32k3a(7)
for family in ("lat", "lat-baker", "net"):
    ps = PointSet(family, 256, 3)
    U = ps.sample(rng.spawn(1))
    print(family, ps.kind, U.min().round(5), U.max().round(5), U.mean(axis=0).round(3))

u = np.linspace(0, 1, 5)
print(baker(u))


# ## Integration error on a smooth function
#
# Compare the spread of estimates of a product of cosines over 30 independent
# randomizations.

# In[ ]:


def f(U):
    return np.prod(1 + 0.3 * np.cos(2 * np.pi * U), axis=1)


for family in ("lat", "lat-baker", "net"):
    ps = PointSet(family, 4096, 4)
    est = [f(ps.sample(MRG32k3a(3).spawn(r))).mean() for r in range(30)]
    print(f"{family:10s} mean {np.mean(est):.8f} sd {np.std(est, ddof=1):.2e}")
mc = [f(MRG32k3a(3).spawn(r).random((4096, 4))).mean() for r in range(30)]
print(f"{'mc':10s} mean {np.mean(mc):.8f} sd {np.std(mc, ddof=1):.2e}")
