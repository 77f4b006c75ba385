#!/usr/bin/env python
# coding: utf-8

# # Reaction networks and the tau-leap chain
#
# A network is a JSON document: species names plus reactions with reactant
# (`alpha`) and product (`beta`) vectors and a rate constant `c`. Propensities
# are mass-action unless a reaction carries an expression.

# In[ ]:


import numpy as np

from tauleap_rqmc.chain import Functional, SimConfig, mc_estimate, simulate_path, step
from tauleap_rqmc.model import builtin_model, parse_network, propensity, serialize_network

doc = """
{"species": ["A", "B"],
 "reactions": [
   {"alpha": [1, 0], "beta": [0, 1], "c": 1.0},
   {"alpha": [0, 1], "beta": [1, 0], "c": 1e-4}
 ]}
"""
net = parse_network(doc)
print(net.l, net.d)
print(net.zeta)


# ### Propensities
#
# `propensity` evaluates one channel at one state with exact binomials;
# `net.propensities` is the vectorized version used by the simulators.

# In[ ]:


x = np.array([100, 10**6])
print([propensity(net, k, x) for k in range(net.d)])
print(net.propensities(np.array([[100, 10**6], [0, 5]])))


# ### Rational propensities
#
# The enzyme model uses a Michaelis-Menten style rate written as an expression
# with a named parameter.

# In[ ]:


enz = builtin_model("enzyme-qssa")
print(enz.net.reactions[1].source, dict(enz.net.parameters))
print(serialize_network(enz.net)[:200], "...")


# ## One step, one path
#
# Each step consumes `d` uniforms, uniform `k` driving reaction `k`.
# With all uniforms at 1/2 in real mode the step is the deterministic
# Euler update, since the normal median equals its mean.

# In[ ]:


x1 = step(net, x, np.array([0.5, 0.5]), 0.2).x
print("integer mode:", x1)

real = builtin_model("rev-iso-normal").net
print("real mode:", step(real, x.astype(float), np.array([0.5, 0.5]), 0.2).x)

cfg = SimConfig(T=1.6, s=8)
u = np.random.default_rng(1).random(cfg.s * net.d)
print("path end:", simulate_path(net, x, cfg, u).x)


# ## Plain Monte Carlo
#
# E[X_1(T)] = 100 exactly for this linear network.

# In[ ]:


net, x0, cfg, g = builtin_model("rev-iso")
out = mc_estimate(net, x0, cfg, g, 10**5, seed=1)
print(f"mean {out.mean:.3f}  se {np.sqrt(out.var_per_run / out.n):.3f}  var/run {out.var_per_run:.1f}")

# several functionals from the same paths
out = mc_estimate(net, x0, cfg, (Functional.coordinate(0), Functional.parse("x1^2", net)), 10**4, seed=1)
print(out.mean)
