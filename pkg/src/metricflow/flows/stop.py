"""Projected Euler step for ODEs constrained to a closed convex set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import LocalFlow, OmegaModulus, VectorSpace, ZERO_MODULUS
from ..errors import NotInBody

MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Ball, box or halfspace in R^n, with its closed-form projection."""

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def ball(cls, center, radius: float) -> "ConvexBody":
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        return cls("ball", {"center": np.asarray(center, dtype=float), "radius": float(radius)})

    @classmethod
    def box(cls, lo, hi) -> "ConvexBody":
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        return cls("box", {"lo": lo, "hi": hi})

    @classmethod
    def halfspace(cls, normal, offset: float) -> "ConvexBody":
        """``{x : <normal, x> <= offset}``."""
        normal = np.asarray(normal, dtype=float)
        if not np.any(normal):
            raise ValueError("halfspace normal must be non-zero")
        return cls("halfspace", {"normal": normal, "offset": float(offset)})

    @property
    def dim(self) -> int:
        p = self.params
        ref = {"ball": "center", "box": "lo", "halfspace": "normal"}[self.kind]
        return p[ref].size

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(project(self, x) - x) <= tol)


def project(body: ConvexBody, x) -> np.ndarray:
    """Minimal-distance projection of ``x`` onto ``body``."""
    x = np.asarray(x, dtype=float)
    p = body.params
    if body.kind == "ball":
        c, r = p["center"], p["radius"]
        off = x - c
        n = np.linalg.norm(off)
        if n <= r:
            return x
        return c + r * off / n
    if body.kind == "box":
        return np.clip(x, p["lo"], p["hi"])
    if body.kind == "halfspace":
        nv, b = p["normal"], p["offset"]
        excess = float(nv @ x) - b
        if excess <= 0:
            return x
        return x - excess * nv / float(nv @ nv)
    raise ValueError(f"unknown body kind {body.kind!r}")


def projection_commutation_defect(body: ConvexBody, u, v, tau: float, tau2: float) -> float:
    """``|P(P(u + tau v) + tau2 v) - P(u + (tau + tau2) v)|`` for the projection P."""
    if tau < 0 or tau2 < 0:
        raise ValueError("tau and tau2 must be non-negative")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    chained = project(body, project(body, u + tau * v) + tau2 * v)
    direct = project(body, u + (tau + tau2) * v)
    return float(np.linalg.norm(chained - direct))


@dataclass(frozen=True)
class ProjectionFit:
    K: float  # least-squares slope of defect against |v| tau tau2
    K_max: float  # smallest constant dominating every sample
    r_squared: float
    samples: int


def fit_projection_constant(body: ConvexBody, points, directions, taus) -> ProjectionFit:
    """Fit ``defect ~ K |v| tau tau2`` over a sweep of base points and directions."""
    xs, ys = [], []
    for u in points:
        for v in directions:
            nv = float(np.linalg.norm(v))
            for a in taus:
                for b in taus:
                    xs.append(nv * a * b)
                    ys.append(projection_commutation_defect(body, u, v, a, b))
    xs, ys = np.asarray(xs), np.asarray(ys)
    K = float(xs @ ys / (xs @ xs))
    ss_res = float(np.sum((ys - K * xs) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    pos = xs > 0
    K_max = float(np.max(ys[pos] / xs[pos])) if np.any(pos) else 0.0
    return ProjectionFit(K, K_max, r2, xs.size)


def boundary_sweep(body: ConvexBody, directions: int = 7):
    """Base point and oblique outward directions for :func:`fit_projection_constant`.

    A disk is rotation invariant, so one boundary point with directions spread
    around its outward normal covers every relative orientation.
    """
    if body.kind != "ball" or body.dim != 2:
        raise NotImplementedError("default sweep is only defined for disks")
    c, r = body.params["center"], body.params["radius"]
    betas = np.linspace(-0.45 * math.pi, 0.45 * math.pi, directions)
    dirs = [np.array([math.cos(b), math.sin(b)]) for b in betas]
    return [c + np.array([r, 0.0])], dirs


def projection_sweep(body: ConvexBody, taus, directions: int = 7) -> list:
    """One :class:`ProjectionFit` per direction of :func:`boundary_sweep`.

    The constant depends on the angle between ``v`` and the normal, so the
    linear law is fitted direction by direction; the largest ``K_max`` is the
    certified constant.
    """
    pts, dirs = boundary_sweep(body, directions)
    return [fit_projection_constant(body, pts, [v], taus) for v in dirs]


@dataclass(frozen=True, eq=False)
class StopFlowConfig:
    """Constrained ODE ``u' = f(t, u)``, ``u`` in ``body``.

    ``f_bound`` bounds ``|f|``, ``f_lip`` is its Lipschitz constant in ``u`` and
    ``f_omega`` its modulus of continuity in time.  ``K`` is the projection
    constant and ``collar`` the width ``d`` of the neighbourhood where the
    projection is smooth.
    """

    body: ConvexBody
    field_f: Callable
    f_bound: float
    f_lip: float
    K: float
    f_omega: OmegaModulus = ZERO_MODULUS
    collar: float = 1.0
    horizon: float = 2.0

    @property
    def delta(self) -> float:
        return min(self.collar / (2.0 * self.f_bound), self.horizon)

    @property
    def stability(self) -> float:
        # per-step factor (1 + f_lip tau) <= exp(f_lip tau), compounded over [0, T]
        return math.exp(self.f_lip * self.horizon)

    @property
    def modulus(self) -> OmegaModulus:
        """Dominates ``f_omega(tau) + (f_lip + K) f_bound tau`` on ``[0, delta]``."""
        linear = (self.f_lip + self.K) * self.f_bound
        if self.f_omega.coefficient == 0:
            return OmegaModulus(linear, 1.0)
        alpha = min(self.f_omega.exponent, 1.0)
        d = self.delta
        coeff = self.f_omega.coefficient * d ** (self.f_omega.exponent - alpha) + linear * d ** (1.0 - alpha)
        return OmegaModulus(coeff, alpha)


def stop_step(cfg: StopFlowConfig, t: float, t0: float, u) -> np.ndarray:
    """``P(u + t f(t0, u))`` with P the projection onto the body."""
    u = np.asarray(u, dtype=float)
    if not cfg.body.contains(u):
        raise NotInBody(f"state {u} is outside the constraint set")
    if t == 0:
        return u
    return project(cfg.body, u + t * np.asarray(cfg.field_f(t0, u), dtype=float))


def stop_flow(cfg: StopFlowConfig) -> LocalFlow:
    return LocalFlow(
        step_fn=lambda tau, t0, u: stop_step(cfg, tau, t0, u),
        space=VectorSpace(cfg.body.dim),
        delta=cfg.delta,
        horizon=cfg.horizon,
        lip=max(1.0 + cfg.f_lip * cfg.delta, cfg.f_bound),
        applicable=lambda t0, u: cfg.body.contains(u),
        omega=cfg.modulus,
        stability=cfg.stability,
        name="stop",
        info={"K": cfg.K, "f_lip": cfg.f_lip, "f_bound": cfg.f_bound},
    )


def outward_rotation(t, u):
    """``f(u) = (-u2, u1) + u``: rotation plus radial growth."""
    return np.array([u[0] - u[1], u[1] + u[0]])


def disk_config(radius: float = 1.0, horizon: float = 2.0, K: Optional[float] = None) -> StopFlowConfig:
    """Disk constraint with the outward-rotating field."""
    body = ConvexBody.ball([0.0, 0.0], radius)
    if K is None:
        K = max(f.K_max for f in projection_sweep(body, np.geomspace(1e-3, 0.1, 8)))
    # |f(u)| = sqrt(2)|u| and the field is linear with operator norm sqrt(2)
    return StopFlowConfig(
        body=body,
        field_f=outward_rotation,
        f_bound=math.sqrt(2.0) * radius,
        f_lip=math.sqrt(2.0),
        K=K,
        collar=radius,
        horizon=horizon,
    )


def disk_solution(t: float, u0=(0.5, 0.0), radius: float = 1.0) -> np.ndarray:
    """Exact constrained trajectory of the outward rotation from a point on the x-axis."""
    r = min(u0[0] * math.exp(t), radius)
    return r * np.array([math.cos(t), math.sin(t)])


def sample_points(cfg: StopFlowConfig, rng: np.random.Generator, count: int) -> list:
    """Uniform points in the body (rejection sampling from its bounding box)."""
    body = cfg.body
    if body.kind == "ball":
        c, r = body.params["center"], body.params["radius"]
        lo, hi = c - r, c + r
    elif body.kind == "box":
        lo, hi = body.params["lo"], body.params["hi"]
    else:
        raise NotImplementedError("sampling from a halfspace is unbounded")
    out = []
    while len(out) < count:
        x = rng.uniform(lo, hi)
        if body.contains(x):
            out.append(x)
    return out
