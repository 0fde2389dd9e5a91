"""Lie-Trotter operator splitting ``F(tau) = S1_tau S2_tau``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from ..core import LocalFlow, OmegaModulus, VectorSpace
from ..errors import DegeneratePair

APPLICABLE_RTOL = 1e-9


class MatrixSemigroup:
    """``t -> exp(t A)`` acting on vectors, with cached exponentials."""

    def __init__(self, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("generator must be a square matrix")
        A.setflags(write=False)
        self.A = A
        self._expm = lru_cache(maxsize=64)(self._compute)

    def _compute(self, t: float) -> np.ndarray:
        return expm(t * self.A)

    def matrix(self, t: float) -> np.ndarray:
        return self._expm(float(t))

    def __call__(self, t: float, u):
        if t == 0:
            return u
        return self.matrix(t) @ u

    @property
    def log_norm(self) -> float:
        """Largest eigenvalue of the symmetric part: ``|exp(tA)| <= exp(t log_norm)``."""
        return float(np.linalg.eigvalsh(0.5 * (self.A + self.A.T)).max())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.A, 2))


@dataclass(frozen=True, eq=False)
class SplitFlowConfig:
    """Two semigroups with their Lipschitz, commutation and Trotter constants.

    ``commutation_omega`` bounds ``d(S1_t S2_t u, S2_t S1_t u) / t`` and
    ``trotter_C`` bounds the Lipschitz constant of every product
    ``[S1_{t/n} S2_{t/n}]^n``.
    """

    sg1: Callable
    sg2: Callable
    lip1: float
    lip2: float
    commutation_omega: OmegaModulus
    trotter_C: float
    dim: int
    delta: float = 0.5
    horizon: float = 1.0
    lip_time: float = 1.0
    radius: Optional[float] = None

    @property
    def modulus(self) -> OmegaModulus:
        w = self.commutation_omega
        return OmegaModulus(self.lip1 * self.lip2 * w.coefficient, w.exponent)

    @classmethod
    def from_matrices(cls, A, B, delta: float = 0.5, horizon: float = 1.0,
                      radius: float = 1.0) -> "SplitFlowConfig":
        """Certified constants for ``exp(tA)``, ``exp(tB)`` on data with ``|u| <= radius``.

        Uses ``|exp(tA)| <= exp(t mu(A))`` with ``mu`` the logarithmic norm and
        ``|exp(tA)exp(tB) - exp(tB)exp(tA)| <= t^2 |[A,B]| exp(t(|A|+|B|))``.
        States along polygonal trajectories then stay within ``trotter_C * radius``.
        """
        s1, s2 = MatrixSemigroup(A), MatrixSemigroup(B)
        if s1.A.shape != s2.A.shape:
            raise ValueError("generators must have the same shape")
        mu1, mu2 = max(s1.log_norm, 0.0), max(s2.log_norm, 0.0)
        lip1, lip2 = math.exp(mu1 * delta), math.exp(mu2 * delta)
        trotter = math.exp((mu1 + mu2) * horizon)
        reach = trotter * radius
        bracket = float(np.linalg.norm(s1.A @ s2.A - s2.A @ s1.A, 2))
        growth = math.exp(delta * (s1.norm + s2.norm))
        # intermediate states in the k-step chain pick up one more S2 factor
        comm = OmegaModulus(bracket * growth * reach * lip2, 1.0)
        lip_time = (s1.norm + s2.norm) * growth * reach
        return cls(s1, s2, lip1, lip2, comm, trotter, s1.A.shape[0], delta, horizon,
                   lip_time, radius)


def split_step(cfg: SplitFlowConfig, t: float, u):
    """``S1_t(S2_t(u))``."""
    if t == 0:
        return u
    return cfg.sg1(t, cfg.sg2(t, u))


def commutation_defect(cfg: SplitFlowConfig, t: float, u) -> float:
    """``|S1_t S2_t u - S2_t S1_t u|``."""
    a = cfg.sg1(t, cfg.sg2(t, u))
    b = cfg.sg2(t, cfg.sg1(t, u))
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def trotter_stability_check(cfg: SplitFlowConfig, t: float, n_max: int, samples) -> float:
    """Largest Lipschitz ratio of ``[S1_{t/n} S2_{t/n}]^n`` over ``n <= n_max`` and sample pairs."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    worst = 0.0
    for u, w in samples:
        d0 = float(np.linalg.norm(np.asarray(u) - np.asarray(w)))
        if d0 == 0:
            raise DegeneratePair("sample pair has zero distance")
        for n in range(1, n_max + 1):
            a, b = u, w
            for _ in range(n):
                a = split_step(cfg, t / n, a)
                b = split_step(cfg, t / n, b)
            worst = max(worst, float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / d0)
    return worst


def split_flow(cfg: SplitFlowConfig) -> LocalFlow:
    applicable = None
    if cfg.radius is not None:
        reach = cfg.trotter_C * cfg.radius * (1 + APPLICABLE_RTOL)
        applicable = lambda t0, u: float(np.linalg.norm(u)) <= reach
    return LocalFlow(
        step_fn=lambda tau, t0, u: split_step(cfg, tau, u),
        space=VectorSpace(cfg.dim),
        delta=cfg.delta,
        horizon=cfg.horizon,
        lip=max(cfg.lip1 * cfg.lip2, cfg.lip_time),
        applicable=applicable,
        omega=cfg.modulus,
        stability=cfg.trotter_C,
        name="split",
        info={"trotter_C": cfg.trotter_C},
    )


NILPOTENT_PAIR = (np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]]))


def sample_ball(dim: int, radius: float, rng: np.random.Generator, count: int) -> list:
    out = []
    for _ in range(count):
        v = rng.normal(size=dim)
        out.append(v / np.linalg.norm(v) * radius * rng.uniform() ** (1.0 / dim))
    return out
