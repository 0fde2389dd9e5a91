# %% [markdown]
# # Heat stencil as a local flow
#
# One step of the stencil averages u(x - 2 sqrt t), u(x) and u(x + 2 sqrt t).
# No single step solves the heat equation, but the dyadic polygonals converge
# to it, and the rate is governed by a square-root modulus.

# %%
import math

import numpy as np

from metricflow import analysis as an
from metricflow.core import ProcessApprox, dyadic_process, euler_epsilon
from metricflow.flows import HeatFlowConfig, heat_flow, heat_solution, sine_profile
from metricflow.flows.heat import sample_profiles

cfg = HeatFlowConfig(grid_size=256, domain_length=2 * math.pi, M=1.0, delta=0.1)
flow = heat_flow(cfg)
u0 = sine_profile(cfg)

# %% [markdown]
# Refine the mesh t 2^-m and compare with the exact decay exp(-t) sin x.

# %%
t = 0.01
exact = heat_solution(cfg, t)
for m in (0, 2, 4, 6, 8, 10):
    approx = euler_epsilon(flow, t * 2.0 ** -m, t, 0.0, u0)
    print(f"m={m:2d}  sup error {flow.dist(approx, exact):.3e}")

res = dyadic_process(ProcessApprox(flow), t, 0.0, u0, 1e-3)
print("certified level", res.level, "tail bound", f"{res.bound:.2e}")

# %% [markdown]
# Normalized k-step defects on kinked profiles give the modulus exponent.

# %%
states = sample_profiles(cfg, np.random.default_rng(0), 32)
fit, samples = an.estimate_omega(flow, states, 0.0, np.geomspace(1e-3, 0.02, 7))
print(f"fitted omega = {fit.coefficient:.3g} tau^{fit.exponent:.3f}")
print(f"certified omega = {cfg.modulus.coefficient:.3g} tau^{cfg.modulus.exponent}")
