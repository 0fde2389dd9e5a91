# %% [markdown]
# # Projected Euler steps on the unit disk
#
# The field (-u2, u1) + u pushes trajectories outward while rotating them.
# Projecting each Euler step back onto the disk gives a local flow whose limit
# follows the circle once it gets there.

# %%
import numpy as np

from metricflow.core import euler_epsilon
from metricflow.flows import ConvexBody, disk_config, disk_solution, projection_sweep, stop_flow
from metricflow.flows.stop import projection_commutation_defect

cfg = disk_config()
flow = stop_flow(cfg)
u0 = np.array([0.5, 0.0])
print(f"delta={cfg.delta:.4f}  K={cfg.K:.4f}  omega={cfg.modulus}")

# %%
for t in (0.5, 1.0, 1.5, 2.0):
    p = euler_epsilon(flow, 2.0 ** -14, t, 0.0, u0)
    print(f"t={t}: |u|={np.linalg.norm(p):.6f}  distance to exact {np.linalg.norm(p - disk_solution(t)):.2e}")

# %% [markdown]
# The projection commutation defect is linear in |v| tau tau' for each
# direction; the slope depends on the angle to the normal.

# %%
for f in projection_sweep(cfg.body, np.geomspace(1e-3, 0.1, 8)):
    print(f"K={f.K:.3f}  K_max={f.K_max:.3f}  r^2={f.r_squared:.4f}")

flat = ConvexBody.halfspace([0.0, 1.0], 0.0)
print("halfspace defect:", projection_commutation_defect(flat, [0.0, -0.25], [0.5, 1.0], 0.5, 0.25))
