# %% [markdown]
# # Lie-Trotter splitting of two non-commuting matrices
#
# A = [[0,1],[0,0]] and B = [[0,0],[1,0]] generate shears; their sum generates
# the hyperbolic rotation [[cosh, sinh], [sinh, cosh]].

# %%
import math

import numpy as np

from metricflow import analysis as an
from metricflow.core import euler_epsilon
from metricflow.flows import NILPOTENT_PAIR, SplitFlowConfig, commutation_defect, split_flow

A, B = NILPOTENT_PAIR
cfg = SplitFlowConfig.from_matrices(A, B, delta=0.5, horizon=1.0, radius=1.0)
flow = split_flow(cfg)
u = np.array([1.0, 0.0])
exact = np.array([math.cosh(1.0), math.sinh(1.0)])

# %%
errs, meshes = [], []
for m in range(1, 15):
    eps = 2.0 ** -m
    meshes.append(eps)
    errs.append(np.linalg.norm(euler_epsilon(flow, eps, 1.0, 0.0, u) - exact))
print(f"error slope in the mesh: {an.rate_fit(meshes, errs).slope:.3f}")
print(f"finest error: {errs[-1]:.2e}")

# %% [markdown]
# The commutation defect is second order in t, so omega is linear.

# %%
ts = np.geomspace(1e-3, 0.1, 8)
d = [commutation_defect(cfg, t, u) for t in ts]
print(f"defect slope {an.rate_fit(ts, d).slope:.3f}, certified omega {cfg.modulus}")
