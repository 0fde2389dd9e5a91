"""Three-point heat stencil on a periodic grid.

``F(t)u(x) = u(x) + t * D2_{2 sqrt t} u(x)`` where ``D2_sigma`` is the centred
second difference with spacing ``sigma``.  Grid-aligned spacings ``sigma = j h``
are exact rolls.  In between, ``sigma**2 * D2_sigma`` is interpolated linearly
in ``sigma**2`` between the two neighbouring aligned spacings.  This keeps every
stencil weight non-negative (so ``F(t)`` is a sup-norm contraction that maps
values into their convex hull), reproduces quadratics exactly and stays
Lipschitz in ``t`` down to ``t = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import GridSpace, LocalFlow, OmegaModulus

APPLICABLE_RTOL = 1e-9


@dataclass(frozen=True)
class HeatFlowConfig:
    """Grid, smoothness bound ``M`` and step horizon of the heat flow.

    ``M`` bounds both ``sup|u''|`` and ``Lip(u'')`` of admissible data,
    measured on the grid by :func:`smoothness`.
    """

    grid_size: int = 256
    domain_length: float = 2 * math.pi
    M: float = 1.0
    delta: float = 0.1
    horizon: float = 1.0

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError("heat grid needs at least 8 nodes")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def space(self) -> GridSpace:
        return GridSpace(self.grid_size, self.domain_length)

    @property
    def modulus(self) -> OmegaModulus:
        return OmegaModulus(14.0 * self.M / 3.0, 0.5)


def _wide_difference(u: np.ndarray, j: int) -> np.ndarray:
    # u(x - jh) - 2u(x) + u(x + jh), periodic
    if j % u.size == 0:
        return np.zeros_like(u)
    return np.roll(u, j) - 2.0 * u + np.roll(u, -j)


def second_difference(u, sigma: float, h: float) -> np.ndarray:
    """Centred second difference of a periodic grid function at spacing ``sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    u = np.asarray(u, dtype=float)
    r = (sigma / h) ** 2
    j = int(math.floor(sigma / h))
    # guard against floor landing one cell high from rounding
    if j * j > r:
        j -= 1
    lam = (r - j * j) / (2 * j + 1)
    acc = lam * _wide_difference(u, j + 1)
    if j > 0:
        acc = acc + (1.0 - lam) * _wide_difference(u, j)
    return acc / (sigma * sigma)


def heat_step(cfg: HeatFlowConfig, t: float, u) -> np.ndarray:
    """One stencil step ``u + t D2_{2 sqrt t} u``."""
    if t == 0:
        return u
    u = np.asarray(u, dtype=float)
    return u + t * second_difference(u, 2.0 * math.sqrt(t), cfg.space.h)


def smoothness(u, h: float) -> float:
    """Grid estimate of ``max(sup|u''|, Lip(u''))``."""
    u = np.asarray(u, dtype=float)
    g = _wide_difference(u, 1) / (h * h)
    lip = np.max(np.abs(np.roll(g, -1) - g)) / h
    return float(max(np.max(np.abs(g)), lip))


def heat_flow(cfg: HeatFlowConfig = HeatFlowConfig()) -> LocalFlow:
    space = cfg.space
    h = space.h

    def applicable(t0, u):
        return smoothness(u, h) <= cfg.M * (1 + APPLICABLE_RTOL)

    return LocalFlow(
        step_fn=lambda tau, t0, u: heat_step(cfg, tau, u),
        space=space,
        delta=cfg.delta,
        horizon=cfg.horizon,
        lip=max(1.0, cfg.M * (1.0 + math.sqrt(cfg.delta))),
        applicable=applicable,
        omega=cfg.modulus,
        stability=1.0,
        name="heat",
        info={"M": cfg.M, "grid_size": cfg.grid_size, "domain_length": cfg.domain_length},
    )


def sine_profile(cfg: HeatFlowConfig, mode: int = 1) -> np.ndarray:
    x = cfg.space.x
    return np.sin(2 * math.pi * mode * x / cfg.domain_length)


def heat_solution(cfg: HeatFlowConfig, t: float, mode: int = 1) -> np.ndarray:
    """Exact heat-equation solution started from :func:`sine_profile`."""
    kappa = 2 * math.pi * mode / cfg.domain_length
    return math.exp(-kappa * kappa * t) * sine_profile(cfg, mode)


def kinked_profile(cfg: HeatFlowConfig, rng: np.random.Generator, knots: int = 6,
                   scale: float = 1.0) -> np.ndarray:
    """Random periodic profile whose grid second difference is piecewise linear.

    The kinks in ``u''`` make these worst-case members of the admissible set;
    the profile is rescaled so that ``smoothness(u) == scale * M``.
    """
    space = cfg.space
    n, h, length = space.n, space.h, space.length
    pos = np.sort(rng.uniform(0, length, knots))
    vals = rng.normal(size=knots)
    xp = np.concatenate([pos - length, pos, pos + length])
    g = np.interp(space.x, xp, np.tile(vals, 3))
    g -= g.mean()
    # invert the discrete Laplacian in Fourier space (mean-zero solution)
    symbol = (2.0 * np.cos(2 * math.pi * np.fft.fftfreq(n)) - 2.0) / (h * h)
    gh = np.fft.fft(g)
    uh = np.zeros_like(gh)
    uh[1:] = gh[1:] / symbol[1:]
    u = np.fft.ifft(uh).real
    return u * (scale * cfg.M / smoothness(u, h))


def sample_profiles(cfg: HeatFlowConfig, rng: np.random.Generator, count: int) -> list:
    return [kinked_profile(cfg, rng, scale=rng.uniform(0.5, 1.0)) for _ in range(count)]
