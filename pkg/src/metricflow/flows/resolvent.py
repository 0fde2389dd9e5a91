"""Backward-Euler (resolvent) flow ``F(t)u = (1/t) R(1/t, A) u`` for a matrix generator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ..core import LocalFlow, OmegaModulus, VectorSpace
from ..errors import SingularSystem

APPLICABLE_RTOL = 1e-9
CONTRACTION_TOL = 1e-12
MAX_CONDITION = 1e12


class ResolventFlowConfig:
    """Generator ``A`` with data in the ball ``|u| <= radius``.

    ``M`` bounds ``|Au|`` and ``|A^2 u|`` on the working set; by default it is
    ``radius * max(|A|, |A^2|)``.  When ``validate`` is set, the contraction
    bound ``|lam R(lam, A)| <= 1`` is checked on a logarithmic grid of ``lam``.
    """

    def __init__(self, A, radius: float = 1.0, M: Optional[float] = None,
                 delta: float = 1.0, horizon: float = 2.0, validate: bool = True):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("generator must be a square matrix")
        if A.shape[0] > 64:
            raise ValueError("dense resolvent solves are limited to n <= 64")
        A.setflags(write=False)
        self.A = A
        self.n = A.shape[0]
        self.radius = float(radius)
        self.delta = float(delta)
        self.horizon = float(horizon)
        if M is None:
            M = self.radius * max(np.linalg.norm(A, 2), np.linalg.norm(A @ A, 2))
        self.M = float(M)
        self.contractive = contraction_gap(A) <= CONTRACTION_TOL
        if validate and not self.contractive:
            raise ValueError("generator fails |lam R(lam, A)| <= 1 on the validation grid")
        self._system = lru_cache(maxsize=64)(self._build_system)

    def _build_system(self, t: float):
        # scaled form (I - tA) stays finite for subnormal t, unlike I/t - A
        system = np.eye(self.n) - t * self.A
        cond = np.linalg.cond(system)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularSystem(f"(I - tA) has condition number {cond:.3g} at t={t}")
        system.setflags(write=False)
        return system, float(cond)

    def condition(self, t: float) -> float:
        return self._system(float(t))[1]

    @property
    def modulus(self) -> OmegaModulus:
        return OmegaModulus(3.0 * self.M, 1.0)


def contraction_gap(A, lams=None) -> float:
    """``max(|lam R(lam, A)|) - 1`` over a logarithmic grid of ``lam``."""
    A = np.asarray(A, dtype=float)
    if lams is None:
        lams = np.logspace(-3, 3, 61)
    eye = np.eye(A.shape[0])
    worst = -math.inf
    for lam in lams:
        try:
            R = np.linalg.inv(lam * eye - A)
        except np.linalg.LinAlgError:
            return math.inf
        worst = max(worst, float(np.linalg.norm(lam * R, 2)))
    return worst - 1.0


def resolvent_step(cfg: ResolventFlowConfig, t: float, u):
    """Solve ``(I - tA) x = u``; ``t = 0`` returns ``u``."""
    if t == 0:
        return u
    system, _ = cfg._system(float(t))
    try:
        return np.linalg.solve(system, np.asarray(u, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def resolvent_identity_check(cfg: ResolventFlowConfig, t: float, s: float, u):
    """Residuals of ``F(t)u = u + t F(t) A u`` and ``tF(t) - sF(s) = (t-s) F(t)F(s)``."""
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    u = np.asarray(u, dtype=float)
    Ft = lambda x: resolvent_step(cfg, t, x)
    Fs = lambda x: resolvent_step(cfg, s, x)
    r1 = np.linalg.norm(Ft(u) - u - t * Ft(cfg.A @ u))
    r2 = np.linalg.norm(t * Ft(u) - s * Fs(u) - (t - s) * Ft(Fs(u)))
    return float(r1), float(r2)


def resolvent_flow(cfg: ResolventFlowConfig) -> LocalFlow:
    reach = cfg.radius * (1 + APPLICABLE_RTOL)
    return LocalFlow(
        step_fn=lambda tau, t0, u: resolvent_step(cfg, tau, u),
        space=VectorSpace(cfg.n),
        delta=cfg.delta,
        horizon=cfg.horizon,
        lip=max(1.0, cfg.M),
        applicable=lambda t0, u: float(np.linalg.norm(u)) <= reach,
        omega=cfg.modulus,
        stability=1.0 if cfg.contractive else None,
        name="resolvent",
        info={"M": cfg.M},
    )


ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def rotation_solution(t: float, u) -> np.ndarray:
    """``exp(t A) u`` for the rotation generator ``A = [[0, 1], [-1, 0]]``."""
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]]) @ np.asarray(u, dtype=float)
