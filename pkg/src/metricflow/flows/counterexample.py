"""Scalar flow that commutes over two equal steps but not over longer chains.

``F(t)u = f(t) u`` on ``[0, 1]`` with ``f(t) = exp(2^k phi(2^-k t))``,
``k = floor(log2 t)``.  The construction gives ``f(2t) = f(t)^2`` exactly, so
doubling a step changes nothing, while ``f(t + s) != f(t) f(s)`` in general:
no semigroup is tangent to ``F``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..core import LocalFlow, OmegaModulus, ScalarSpace, ZERO_MODULUS


def default_phi(s):
    return -((s - 1.0) ** 2) * (s - 2.0) ** 2


def default_phi_prime(s):
    return -2.0 * (s - 1.0) * (s - 2.0) * (2.0 * s - 3.0)


@dataclass(frozen=True, eq=False)
class CounterexampleFlowConfig:
    """``phi`` on ``[1, 2]`` with zero values and slopes at both ends and ``phi <= 0``."""

    phi: Callable = default_phi
    phi_prime: Optional[Callable] = None
    delta: float = 4.0
    horizon: float = 8.0

    def __post_init__(self):
        if self.phi is default_phi and self.phi_prime is None:
            object.__setattr__(self, "phi_prime", default_phi_prime)
        self.validate()

    def derivative(self, s):
        if self.phi_prime is not None:
            return self.phi_prime(s)
        h = 1e-6
        return (self.phi(s + h) - self.phi(s - h)) / (2 * h)

    def validate(self, samples: int = 2001, tol: float = 1e-8):
        s = np.linspace(1.0, 2.0, samples)
        vals = np.array([self.phi(x) for x in s])
        if abs(self.phi(1.0)) > tol or abs(self.phi(2.0)) > tol:
            raise ValueError("phi must vanish at 1 and 2")
        ends = (self.phi_prime or self._one_sided)
        if abs(ends(1.0)) > 1e-6 or abs(ends(2.0)) > 1e-6:
            raise ValueError("phi' must vanish at 1 and 2")
        if np.any(vals > tol):
            raise ValueError("phi must be non-positive on [1, 2]")
        if np.ptp(vals) <= tol:
            raise ValueError("phi must not be constant")

    def _one_sided(self, s):
        h = 1e-7
        if s <= 1.0:
            return (self.phi(s + h) - self.phi(s)) / h
        return (self.phi(s) - self.phi(s - h)) / h

    def max_slope(self, samples: int = 20001) -> float:
        """``max |phi'|`` on ``[1, 2]``, the time-Lipschitz constant of ``f``."""
        s = np.linspace(1.0, 2.0, samples)
        return float(np.max(np.abs([self.derivative(x) for x in s])))


def dyadic_split(t: float):
    """``(k, s)`` with ``t = 2^k s``, ``s`` in ``[1, 2)``; exact for floats."""
    mant, exp = math.frexp(t)
    # frexp: t = mant * 2**exp with mant in [0.5, 1)
    return exp - 1, mant * 2.0


def counterexample_f(cfg: CounterexampleFlowConfig, t: float) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 1.0
    k, s = dyadic_split(t)
    return math.exp(math.ldexp(cfg.phi(s), k))


def semigroup_defect(cfg: CounterexampleFlowConfig, t: float, s: float) -> float:
    """``|f(t + s) - f(t) f(s)|``."""
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    return abs(counterexample_f(cfg, t + s) - counterexample_f(cfg, t) * counterexample_f(cfg, s))


def k_step_defect(cfg: CounterexampleFlowConfig, tau: float, k: int, u: float = 1.0) -> float:
    """``|F(k tau) F(tau) u - F((k+1) tau) u|``."""
    f = lambda x: counterexample_f(cfg, x)
    return abs(f(k * tau) * f(tau) * u - f((k + 1) * tau) * u)


class Eq2Check(NamedTuple):
    modulus: OmegaModulus  # fitted modulus for the two-step condition
    two_step: np.ndarray  # |F(tau)F(tau)u - F(2 tau)u| / tau
    three_step: np.ndarray  # |F(2 tau)F(tau)u - F(3 tau)u| / (2 tau)
    floor: float  # min of the three-step column


def eq2_modulus_check(cfg: CounterexampleFlowConfig, tau_grid, u: float = 1.0) -> Eq2Check:
    """Two-step commutation defect (zero) next to the three-step one (not vanishing)."""
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus <= 0) or np.any(3 * taus > cfg.delta):
        raise ValueError("need 0 < 3 tau <= delta")
    two = np.array([k_step_defect(cfg, x, 1, u) / x for x in taus])
    three = np.array([k_step_defect(cfg, x, 2, u) / (2 * x) for x in taus])
    modulus = ZERO_MODULUS if not np.any(two) else OmegaModulus(float(np.max(two)), 1.0)
    return Eq2Check(modulus, two, three, float(three.min()))


def counterexample_flow(cfg: CounterexampleFlowConfig = CounterexampleFlowConfig()) -> LocalFlow:
    return LocalFlow(
        step_fn=lambda tau, t0, u: counterexample_f(cfg, tau) * u,
        space=ScalarSpace(),
        delta=cfg.delta,
        horizon=cfg.horizon,
        lip=max(1.0, cfg.max_slope()),
        applicable=lambda t0, u: 0.0 <= u <= 1.0,
        omega=None,
        stability=1.0,
        name="counterexample",
    )
