# %% [markdown]
# # Backward Euler as a local flow
#
# For a contractive generator A the resolvent step (I - tA)^-1 u has a linear
# modulus 3M tau, so its polygonals converge at first order to exp(tA) u.

# %%
import numpy as np

from metricflow import analysis as an
from metricflow.core import euler_epsilon
from metricflow.flows import ROTATION, ResolventFlowConfig, resolvent_flow, resolvent_identity_check
from metricflow.flows import rotation_solution

cfg = ResolventFlowConfig(ROTATION, delta=1.0, horizon=2.0)
flow = resolvent_flow(cfg)
u = np.array([1.0, 0.0])

# %%
meshes = [2.0 ** -m for m in range(2, 15)]
errs = [np.linalg.norm(euler_epsilon(flow, h, 1.0, 0.0, u) - rotation_solution(1.0, u)) for h in meshes]
print(f"error at m=14: {errs[-1]:.2e}, slope {an.rate_fit(meshes, errs).slope:.3f}")
print("identity residuals:", resolvent_identity_check(cfg, 0.3, 0.8, u))

# %%
rng = np.random.default_rng(1)
states = [rng.normal(size=2) for _ in range(32)]
states = [s / max(1.0, np.linalg.norm(s)) for s in states]
fit, _ = an.estimate_omega(flow, states, 0.0, np.geomspace(1e-3, 0.1, 7))
print(f"fitted omega {fit.coefficient:.3g} tau^{fit.exponent:.3f}  vs  certified {cfg.modulus}")
