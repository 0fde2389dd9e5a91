"""Concrete local flows and a registry that builds them from plain parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..core import LocalFlow
from .counterexample import (
    CounterexampleFlowConfig,
    counterexample_f,
    counterexample_flow,
    eq2_modulus_check,
    k_step_defect,
    semigroup_defect,
)
from .heat import (
    HeatFlowConfig,
    heat_flow,
    heat_solution,
    heat_step,
    kinked_profile,
    second_difference,
    sine_profile,
    smoothness,
)
from .resolvent import (
    ROTATION,
    ResolventFlowConfig,
    resolvent_flow,
    resolvent_identity_check,
    resolvent_step,
    rotation_solution,
)
from .split import (
    NILPOTENT_PAIR,
    MatrixSemigroup,
    SplitFlowConfig,
    commutation_defect,
    split_flow,
    split_step,
    trotter_stability_check,
)
from .stop import (
    ConvexBody,
    StopFlowConfig,
    disk_config,
    disk_solution,
    fit_projection_constant,
    projection_sweep,
    project,
    projection_commutation_defect,
    stop_flow,
    stop_step,
)
from . import heat as _heat, split as _split, stop as _stop


@dataclass(frozen=True, eq=False)
class FlowCase:
    """A flow together with a default initial state, a sampler and an oracle."""

    kind: str
    flow: LocalFlow
    initial: object
    sampler: Callable[[np.random.Generator, int], list]
    reference: Optional[Callable[[float, object], object]] = None
    config: object = None


def _heat_case(grid_size=256, domain_length=2 * math.pi, M=1.0, delta=0.1, horizon=1.0):
    cfg = HeatFlowConfig(int(grid_size), float(domain_length), float(M), float(delta), float(horizon))
    return FlowCase(
        "heat", heat_flow(cfg), sine_profile(cfg),
        lambda rng, n: _heat.sample_profiles(cfg, rng, n),
        lambda t, u: heat_solution(cfg, t), cfg,
    )


def _stop_case(radius=1.0, horizon=2.0, K=None, initial=(0.5, 0.0)):
    cfg = disk_config(float(radius), float(horizon), K)
    u0 = np.array(initial, dtype=float)
    ref = None
    if u0[1] == 0.0 and u0[0] > 0:
        ref = lambda t, u: disk_solution(t, tuple(u0), cfg.body.params["radius"])
    return FlowCase("stop", stop_flow(cfg), u0,
                    lambda rng, n: _stop.sample_points(cfg, rng, n), ref, cfg)


def _split_case(A=None, B=None, delta=0.5, horizon=1.0, radius=1.0, initial=(1.0, 0.0)):
    if A is None and B is None:
        A, B = NILPOTENT_PAIR
    cfg = SplitFlowConfig.from_matrices(A, B, float(delta), float(horizon), float(radius))
    u0 = np.array(initial, dtype=float)
    gen = MatrixSemigroup(np.asarray(A, dtype=float) + np.asarray(B, dtype=float))
    return FlowCase("split", split_flow(cfg), u0,
                    lambda rng, n: _split.sample_ball(cfg.dim, cfg.radius, rng, n),
                    lambda t, u: gen(t, u), cfg)


def _resolvent_case(A=None, radius=1.0, delta=1.0, horizon=2.0, initial=(1.0, 0.0)):
    A = ROTATION if A is None else np.asarray(A, dtype=float)
    cfg = ResolventFlowConfig(A, radius=float(radius), delta=float(delta), horizon=float(horizon))
    gen = MatrixSemigroup(A)
    return FlowCase("resolvent", resolvent_flow(cfg), np.array(initial, dtype=float),
                    lambda rng, n: _split.sample_ball(cfg.n, cfg.radius, rng, n),
                    lambda t, u: gen(t, u), cfg)


def _counterexample_case(delta=4.0, horizon=8.0, initial=1.0):
    cfg = CounterexampleFlowConfig(delta=float(delta), horizon=float(horizon))
    return FlowCase("counterexample", counterexample_flow(cfg), float(initial),
                    lambda rng, n: list(rng.uniform(0.0, 1.0, n)),
                    lambda t, u: counterexample_f(cfg, t) * u, cfg)


REGISTRY = {
    "heat": (_heat_case, "three-point heat stencil on a periodic grid: L=1, ω=C·τ^0.5 with C=14M/3"),
    "stop": (_stop_case, "projected Euler step on a convex set: L=exp(Lip(f)·T), ω=(Lip(f)+K)·sup|f|·τ"),
    "split": (_split_case, "Lie-Trotter product of two matrix semigroups: L=Trotter constant, ω=C·τ"),
    "resolvent": (_resolvent_case, "backward-Euler resolvent step: L=1, ω=3M·τ"),
    "counterexample": (_counterexample_case,
                       "scalar flow f(t)u: two-step commutation holds, k-step commutation fails; no certified ω"),
}


def build_case(kind: str, **params) -> FlowCase:
    try:
        builder = REGISTRY[kind][0]
    except KeyError:
        raise ValueError(f"unknown flow {kind!r}; expected one of {sorted(REGISTRY)}") from None
    return builder(**params)


__all__ = [
    "FlowCase", "REGISTRY", "build_case",
    "HeatFlowConfig", "heat_flow", "heat_step", "second_difference", "smoothness",
    "sine_profile", "heat_solution", "kinked_profile",
    "ConvexBody", "StopFlowConfig", "project", "stop_step", "stop_flow", "disk_config",
    "disk_solution", "projection_commutation_defect", "fit_projection_constant",
    "projection_sweep",
    "MatrixSemigroup", "SplitFlowConfig", "split_step", "split_flow", "commutation_defect",
    "trotter_stability_check", "NILPOTENT_PAIR",
    "ResolventFlowConfig", "resolvent_step", "resolvent_flow", "resolvent_identity_check",
    "ROTATION", "rotation_solution",
    "CounterexampleFlowConfig", "counterexample_f", "counterexample_flow", "semigroup_defect",
    "eq2_modulus_check", "k_step_defect",
]
