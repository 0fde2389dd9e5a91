# %% [markdown]
# # Two-step commutation is not enough
#
# F(t)u = f(t)u with f(t) = exp(2^k phi(2^-k t)) satisfies f(2t) = f(t)^2, so
# any two equal steps commute with the doubled step.  Longer chains do not,
# and f is not a semigroup.

# %%
import numpy as np

from metricflow.flows import CounterexampleFlowConfig, counterexample_f, eq2_modulus_check, semigroup_defect

cfg = CounterexampleFlowConfig()
for t in (0.5, 1.0, 1.5, 3.0):
    print(f"f({t}) = {counterexample_f(cfg, t):.6f}")

# %%
print(f"|f(1.5) - f(1) f(0.5)| = {semigroup_defect(cfg, 1.0, 0.5):.5f}")
chk = eq2_modulus_check(cfg, [0.5 * 2.0 ** -j for j in range(16)])
print("two-step defects:", np.unique(chk.two_step))
print("three-step normalized defects:", np.round(chk.three_step[[0, 4, 8, 15]], 5))
print(f"floor {chk.floor:.4f}")
