"""Local flows on metric spaces, Euler polygonals and dyadic process limits.

A local flow is a one-step map ``F(tau, t0, u)`` defined for ``0 <= tau <= delta``
with ``F(0, t0, u) == u``.  Chaining steps along a time partition gives an Euler
polygonal; refining equispaced partitions dyadically converges (under the
commutation and stability hypotheses carried by :class:`OmegaModulus` and the
stability constant ``L``) to the global process ``P(t, t0)``.

States are plain Python floats or numpy arrays.  The space objects below own the
metric and refuse to compare states of the wrong shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    HorizonExceeded,
    InvalidRange,
    MeshTooCoarse,
    NoConvergence,
    NotApplicable,
    SpaceMismatch,
)

# slack for comparisons of accumulated floating point times
TIME_RTOL = 1e-12

LN2 = math.log(2.0)


# --------------------------------------------------------------------------
# metric spaces
# --------------------------------------------------------------------------

class ScalarSpace:
    """Real numbers with ``d(u, w) = |u - w|``."""

    name = "scalar"

    def check(self, u):
        if np.ndim(u) != 0:
            raise SpaceMismatch(f"{self.name}: expected a scalar, got shape {np.shape(u)}")
        return float(u)

    def dist(self, u, w) -> float:
        return abs(self.check(u) - self.check(w))

    def __repr__(self):
        return "ScalarSpace()"


class VectorSpace:
    """R^dim with the Euclidean norm."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.name = f"vector[{self.dim}]"

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise SpaceMismatch(f"{self.name}: expected shape ({self.dim},), got {u.shape}")
        return u

    def dist(self, u, w) -> float:
        return float(np.linalg.norm(self.check(u) - self.check(w)))

    def __eq__(self, other):
        return isinstance(other, VectorSpace) and other.dim == self.dim

    def __hash__(self):
        return hash(("vector", self.dim))

    def __repr__(self):
        return f"VectorSpace({self.dim})"


class GridSpace:
    """Uniform periodic 1-D grid functions with the sup-norm distance.

    Node ``i`` sits at ``x_i = i * h`` with ``h = length / n``; values are
    periodically extended.
    """

    def __init__(self, n: int, length: float):
        if n < 3:
            raise ValueError("grid needs at least 3 nodes")
        if not length > 0:
            raise ValueError("grid length must be positive")
        self.n = int(n)
        self.length = float(length)
        self.h = self.length / self.n
        self.name = f"grid[{self.n}, {self.length:g}]"

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise SpaceMismatch(f"{self.name}: expected shape ({self.n},), got {u.shape}")
        return u

    def dist(self, u, w) -> float:
        return float(np.max(np.abs(self.check(u) - self.check(w))))

    def __eq__(self, other):
        return isinstance(other, GridSpace) and (other.n, other.length) == (self.n, self.length)

    def __hash__(self):
        return hash(("grid", self.n, self.length))

    def __repr__(self):
        return f"GridSpace({self.n}, {self.length!r})"


# --------------------------------------------------------------------------
# commutation modulus
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaModulus:
    """Power-law modulus ``omega(tau) = coefficient * tau**exponent``."""

    coefficient: float
    exponent: float = 1.0

    def __post_init__(self):
        if not self.coefficient >= 0:
            raise ValueError(f"coefficient must be >= 0, got {self.coefficient}")
        if not self.exponent > 0:
            raise ValueError(f"exponent must be > 0, got {self.exponent}")

    def __call__(self, tau):
        return self.coefficient * np.power(tau, self.exponent)

    def integral(self, a: float, b: float) -> float:
        """Closed form of the integral of omega(x)/x over [a, b]."""
        alpha = self.exponent
        return self.coefficient * (b ** alpha - a ** alpha) / alpha


ZERO_MODULUS = OmegaModulus(0.0, 1.0)


def osgood_integral(omega: OmegaModulus, a: float, b: float, delta: Optional[float] = None) -> float:
    """Integral of ``omega(xi) / xi`` from ``a`` to ``b``.

    Raises InvalidRange unless ``0 <= a <= b`` (and ``b <= delta`` when given).
    """
    if a < 0 or a > b:
        raise InvalidRange(f"need 0 <= a <= b, got a={a}, b={b}")
    if delta is not None and b > delta * (1 + TIME_RTOL):
        raise InvalidRange(f"upper limit {b} exceeds delta={delta}")
    return omega.integral(a, b)


def tangency_bound(omega: OmegaModulus, L: float, t: float, delta: Optional[float] = None) -> float:
    """Upper bound on ``d(P(t)u, F(t)u) / t``: ``(2L/ln 2) * int_0^t omega/xi``."""
    if not t > 0:
        raise InvalidRange(f"t must be positive, got {t}")
    return 2.0 * L / LN2 * osgood_integral(omega, 0.0, t, delta)


def euler_error_bound(omega: OmegaModulus, L: float, t: float, mesh: float,
                      delta: Optional[float] = None) -> float:
    """Upper bound on the distance between any Euler polygonal of mesh ``mesh`` and P."""
    if not mesh > 0:
        raise InvalidRange(f"mesh must be positive, got {mesh}")
    if t < 0:
        raise InvalidRange(f"t must be non-negative, got {t}")
    return 2.0 * L * L / LN2 * t * osgood_integral(omega, 0.0, mesh, delta)


def dyadic_tail_bound(omega: OmegaModulus, L: float, t: float, level: int) -> float:
    """Distance bound between ``F^{t 2^-level}(t)`` and the limit process."""
    return 2.0 * L / LN2 * t * omega.integral(0.0, t * 2.0 ** -level)


# --------------------------------------------------------------------------
# local flows and partitions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalFlow:
    """A local flow ``(tau, t0, u) -> F(tau, t0) u`` on ``space``.

    ``omega`` and ``stability`` are the certified commutation modulus and
    polygonal Lipschitz constant when the flow carries them; ``applicable`` is
    the membership test for the flow domain (None means the whole space).
    """

    step_fn: Callable[[float, float, Any], Any]
    space: Any
    delta: float
    horizon: float
    lip: Optional[float] = None
    applicable: Optional[Callable[[float, Any], bool]] = None
    omega: Optional[OmegaModulus] = None
    stability: Optional[float] = None
    name: str = "flow"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.horizon >= 0:
            raise ValueError("horizon must be non-negative")

    def step(self, tau: float, t0: float, u):
        if tau == 0:
            return u
        return self.step_fn(tau, t0, u)

    __call__ = step

    def dist(self, u, w) -> float:
        return self.space.dist(u, w)

    def is_applicable(self, t0: float, u) -> bool:
        return self.applicable is None or bool(self.applicable(t0, u))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Partition ``0 = tau_0 < ... < tau_{k+1} = t`` driving an Euler polygonal.

    ``increments[h]`` is the length of step ``h``; it is stored (not just
    recomputed from the breakpoints) so that equispaced schedules reproduce the
    epsilon-polygonal step lengths exactly.
    """

    breakpoints: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        inc = np.asarray(self.increments, dtype=float)
        if b.ndim != 1 or b.size < 1 or b[0] != 0.0:
            raise ValueError("breakpoints must be a 1-D sequence starting at 0")
        if inc.shape != (b.size - 1,):
            raise ValueError("need exactly one increment per interval")
        if np.any(inc <= 0) or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "increments", inc)

    @classmethod
    def from_breakpoints(cls, breakpoints: Sequence[float]) -> "Schedule":
        b = np.asarray(breakpoints, dtype=float)
        return cls(b, np.diff(b))

    @classmethod
    def uniform(cls, t: float, eps: float) -> "Schedule":
        """Equispaced steps of length ``eps`` plus the final fragment, if any."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        k = int(math.floor(t / eps))
        b = [h * eps for h in range(k + 1)]
        inc = [eps] * k
        rest = t - k * eps
        if rest > 0:
            b.append(t)
            inc.append(rest)
        return cls(np.array(b), np.array(inc))

    @classmethod
    def geometric(cls, t: float, n: int, ratio: float = 0.8) -> "Schedule":
        """``n`` steps whose lengths shrink geometrically by ``ratio``."""
        if n < 1 or not ratio > 0:
            raise ValueError("need n >= 1 and ratio > 0")
        w = ratio ** np.arange(n)
        inc = t * w / w.sum()
        b = np.concatenate([[0.0], np.cumsum(inc)])
        b[-1] = t
        return cls(b, np.diff(b))

    @property
    def t(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def mesh(self) -> float:
        return float(self.increments.max()) if self.increments.size else 0.0

    def __len__(self):
        return self.increments.size


def _check_window(flow: LocalFlow, t: float, t0: float):
    if t < 0:
        raise HorizonExceeded(f"negative duration t={t}")
    T = flow.horizon
    if t0 < 0 or t0 > T * (1 + TIME_RTOL) or t0 + t > T * (1 + TIME_RTOL) + TIME_RTOL:
        raise HorizonExceeded(f"[{t0}, {t0 + t}] is not inside [0, {T}]")


def _check_step(flow: LocalFlow, tau: float):
    if tau > flow.delta * (1 + TIME_RTOL):
        raise MeshTooCoarse(f"step {tau} exceeds delta={flow.delta}")


def _advance(flow: LocalFlow, tau: float, start: float, u):
    if not flow.is_applicable(start, u):
        raise NotApplicable(f"{flow.name}: state outside the flow domain at time {start}")
    return flow.step(tau, start, u)


def compose_euler(flow: LocalFlow, sched: Schedule, t0: float, u):
    """Euler polygonal of ``flow`` along ``sched`` started from ``u`` at ``t0``."""
    _check_window(flow, sched.t, t0)
    for tau in sched.increments:
        _check_step(flow, tau)
    for tau, start in zip(sched.increments, sched.breakpoints[:-1]):
        u = _advance(flow, float(tau), t0 + float(start), u)
    return u


def euler_epsilon(flow: LocalFlow, eps: float, t: float, t0: float, u):
    """Euler eps-polygonal ``F^eps(t, t0) u``.

    ``k = floor(t / eps)`` full steps followed by the fragment ``t - k eps``;
    the fragment is applied even when it has zero length.
    """
    if not eps > 0:
        raise MeshTooCoarse(f"eps must be positive, got {eps}")
    _check_step(flow, eps)
    _check_window(flow, t, t0)
    k = int(math.floor(t / eps))
    for h in range(k):
        u = _advance(flow, eps, t0 + h * eps, u)
    rest = max(t - k * eps, 0.0)
    return _advance(flow, rest, t0 + k * eps, u)


# --------------------------------------------------------------------------
# dyadic approximation of the process
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProcessApprox:
    """Settings for approximating ``P`` by dyadic eps-polygonals.

    ``omega``/``stability`` default to the flow's certified values.  Without a
    modulus, or with ``empirical`` set, the refinement runs in empirical mode.
    """

    flow: LocalFlow
    omega: Optional[OmegaModulus] = None
    stability: Optional[float] = None
    max_level: int = 24
    empirical: bool = False

    @property
    def modulus(self) -> Optional[OmegaModulus]:
        if self.empirical:
            return None
        return self.omega if self.omega is not None else self.flow.omega

    @property
    def L(self) -> float:
        if self.stability is not None:
            return self.stability
        return self.flow.stability if self.flow.stability is not None else 1.0

    def min_level(self, t: float) -> int:
        """Smallest ``m`` with ``t 2^-m <= delta``."""
        m = 0
        while t * 2.0 ** -m > self.flow.delta * (1 + TIME_RTOL):
            m += 1
        return m

    def at_level(self, t: float, t0: float, u, m: int):
        return euler_epsilon(self.flow, t * 2.0 ** -m, t, t0, u)


class DyadicResult(NamedTuple):
    state: Any
    bound: float
    level: int
    empirical: bool


def dyadic_process(pa: ProcessApprox, t: float, t0: float, u, tol: float) -> DyadicResult:
    """Approximate ``P(t, t0) u`` to within ``tol``.

    With a modulus, picks the smallest level whose theoretical tail bound is
    below ``tol``; otherwise refines until consecutive levels agree to ``tol``.
    """
    if not t > 0:
        raise InvalidRange(f"t must be positive, got {t}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_window(pa.flow, t, t0)
    m = pa.min_level(t)
    omega = pa.modulus
    if omega is not None:
        L = pa.L
        while dyadic_tail_bound(omega, L, t, m) > tol:
            m += 1
            if m > pa.max_level:
                raise NoConvergence(f"tail bound above {tol} at the level cap {pa.max_level}")
        return DyadicResult(pa.at_level(t, t0, u, m), dyadic_tail_bound(omega, L, t, m), m, False)

    prev = pa.at_level(t, t0, u, m)
    while True:
        m += 1
        if m > pa.max_level:
            raise NoConvergence(f"dyadic iterates still {tol}-apart at the level cap {pa.max_level}")
        cur = pa.at_level(t, t0, u, m)
        gap = pa.flow.dist(prev, cur)
        if gap < tol:
            return DyadicResult(cur, gap, m, True)
        prev = cur
