"""Empirical certification of local flows against the convergence bounds.

Everything here measures distances between concrete iterates and compares them
with the closed-form bounds from :mod:`metricflow.core`.  The process ``P`` is
never observable, so checks that involve it use a finite dyadic level and add
the theoretical tail of that level to the bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .core import (
    LN2,
    LocalFlow,
    OmegaModulus,
    Schedule,
    ZERO_MODULUS,
    compose_euler,
    dyadic_tail_bound,
    euler_epsilon,
    euler_error_bound,
    osgood_integral,
    tangency_bound,
)
from .errors import DegeneratePair, TooFewPoints

PASS_RTOL = 1e-6
# absolute floor so that exact processes (bound 0) survive roundoff
PASS_ATOL = 1e-12
# raw defects at or below this are roundoff, not commutation error
DEFECT_FLOOR = 1e-13


def within(measured: float, bound: float) -> bool:
    return measured <= bound * (1 + PASS_RTOL) + PASS_ATOL


@dataclass(frozen=True)
class DefectSample:
    tau: float
    k: int
    defect: float

    @property
    def normalized(self) -> float:
        return self.defect / (self.k * self.tau)


@dataclass(frozen=True)
class RateFit:
    log_x: np.ndarray
    log_y: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def rate_fit(xs: Sequence[float], ys: Sequence[float]) -> RateFit:
    """Least-squares line through ``(log x, log y)``; non-positive points are dropped."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 3:
        raise TooFewPoints(f"need >= 3 positive points, got {int(keep.sum())}")
    lx, ly = np.log(xs[keep]), np.log(ys[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(lx, ly, float(slope), float(intercept), min(max(r2, 0.0), 1.0))


@dataclass
class ReportRow:
    params: dict
    measured: float
    bound: float

    @property
    def passed(self) -> bool:
        return within(self.measured, self.bound)


@dataclass
class ConvergenceReport:
    flow: str
    check: str
    rows: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


# --------------------------------------------------------------------------
# estimation
# --------------------------------------------------------------------------

def k_step_defects(flow: LocalFlow, u, t0: float, tau: float, k_max: int) -> list:
    """Defects ``d(F(k tau, t0+tau) F(tau, t0) u, F((k+1) tau, t0) u)`` for ``k = 1..k_max``."""
    out = []
    first = flow.step(tau, t0, u)
    for k in range(1, k_max + 1):
        chained = flow.step(k * tau, t0 + tau, first)
        direct = flow.step((k + 1) * tau, t0, u)
        out.append(DefectSample(tau, k, flow.dist(chained, direct)))
    return out


def _dominating_coefficient(samples, alpha: float) -> float:
    ratios = [s.normalized / s.tau ** alpha for s in samples]
    C = max(ratios) if ratios else 0.0
    while any(s.normalized > C * s.tau ** alpha for s in samples):
        C = math.nextafter(C, math.inf)
    return C


def estimate_omega(flow: LocalFlow, u_samples, t0: float, tau_grid, k_max: int = 4,
                   floor: float = DEFECT_FLOOR):
    """Fit ``omega(tau) = C tau^alpha`` to the worst normalized k-step defects.

    The exponent comes from a log-log fit of the per-tau maxima; ``C`` is then
    raised until the modulus dominates every sample.  Defects at or below
    ``floor`` are treated as roundoff: they are kept in the returned samples but
    ignored by the fit, so an exact process gets ``C = 0``.
    """
    u_samples = list(u_samples)
    if not u_samples:
        raise ValueError("need at least one sample state")
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus <= 0) or (k_max + 1) * taus.max() > flow.delta * (1 + 1e-12):
        raise ValueError("every (k_max + 1) * tau must lie in (0, delta]")
    if t0 + (k_max + 1) * taus.max() > flow.horizon * (1 + 1e-12):
        raise ValueError("tau grid leaves the time horizon")
    samples = []
    worst = []
    for tau in taus:
        row = []
        for u in u_samples:
            row.extend(k_step_defects(flow, u, t0, float(tau), k_max))
        samples.extend(row)
        real = [s.normalized for s in row if s.defect > floor]
        worst.append(max(real) if real else 0.0)
    worst = np.asarray(worst)
    if not np.any(worst > 0):
        return ZERO_MODULUS, samples
    try:
        alpha = rate_fit(taus, worst).slope
    except TooFewPoints:
        alpha = 1.0
    if not alpha > 0:
        raise ValueError(f"normalized defects do not vanish with tau (fitted exponent {alpha:.3g})")
    kept = [s for s in samples if s.defect > floor]
    return OmegaModulus(_dominating_coefficient(kept, alpha), alpha), samples


def estimate_stability(flow: LocalFlow, pairs, eps_grid, t: float, t0: float) -> float:
    """Largest ``d(F^eps(t)u, F^eps(t)w) / d(u, w)`` over the grid and pairs."""
    worst = 0.0
    for u, w in pairs:
        d0 = flow.dist(u, w)
        if d0 == 0:
            raise DegeneratePair("sample pair has zero distance")
        for eps in eps_grid:
            a = euler_epsilon(flow, float(eps), t, t0, u)
            b = euler_epsilon(flow, float(eps), t, t0, w)
            worst = max(worst, flow.dist(a, b) / d0)
    return worst


# --------------------------------------------------------------------------
# bound verification
# --------------------------------------------------------------------------

class BoundCheck(NamedTuple):
    measured: float
    bound: float
    passed: bool


def verify_dyadic_bound(flow: LocalFlow, omega: OmegaModulus, L: float, t: float, t0: float,
                        u, m: int, n: int) -> BoundCheck:
    """Cauchy estimate between dyadic levels ``m < n``."""
    if not n > m:
        raise ValueError("need n > m")
    coarse, fine = t * 2.0 ** -m, t * 2.0 ** -n
    a = euler_epsilon(flow, coarse, t, t0, u)
    b = euler_epsilon(flow, fine, t, t0, u)
    measured = flow.dist(a, b)
    bound = 2.0 * L / LN2 * t * osgood_integral(omega, fine, coarse)
    return BoundCheck(measured, bound, within(measured, bound))


def verify_dyadic_pairs(flow: LocalFlow, omega: OmegaModulus, L: float, t: float, t0: float, u,
                        levels: Sequence[int], max_gap: int = 10) -> ConvergenceReport:
    """:func:`verify_dyadic_bound` for every ``m < n`` in ``levels`` with ``n - m <= max_gap``.

    Each level is evaluated once and reused across pairs.
    """
    levels = sorted(set(int(m) for m in levels))
    if levels and t * 2.0 ** -levels[0] > flow.delta * (1 + 1e-12):
        raise ValueError("coarsest level has a step longer than delta")
    states = {m: euler_epsilon(flow, t * 2.0 ** -m, t, t0, u) for m in levels}
    report = ConvergenceReport(flow.name, "dyadic")
    for i, m in enumerate(levels):
        for n in levels[i + 1:]:
            if n - m > max_gap:
                break
            measured = flow.dist(states[m], states[n])
            bound = 2.0 * L / LN2 * t * osgood_integral(omega, t * 2.0 ** -n, t * 2.0 ** -m)
            report.rows.append(ReportRow({"t": t, "m": m, "n": n}, measured, bound))
    return report


def _process_level(flow: LocalFlow, t: float, level: int) -> int:
    m = level
    while t * 2.0 ** -m > flow.delta * (1 + 1e-12):
        m += 1
    return m


def verify_tangency(flow: LocalFlow, omega: OmegaModulus, L: float, t_grid, t0: float, u,
                    tol_m: int) -> ConvergenceReport:
    """Compare ``d(P(t)u, F(t)u) / t`` with the tangency bound on each ``t``."""
    report = ConvergenceReport(flow.name, "tangency")
    for t in t_grid:
        t = float(t)
        p = euler_epsilon(flow, t * 2.0 ** -tol_m, t, t0, u)
        f = flow.step(t, t0, u)
        measured = flow.dist(p, f) / t
        bound = tangency_bound(omega, L, t) + dyadic_tail_bound(omega, L, t, tol_m) / t
        report.rows.append(ReportRow({"t": t, "level": tol_m}, measured, bound))
    return report


def verify_euler_error(flow: LocalFlow, omega: OmegaModulus, L: float, schedules, t0: float, u,
                       tol_m: int) -> ConvergenceReport:
    """Distance from each schedule's polygonal to the level-``tol_m`` process approximation."""
    report = ConvergenceReport(flow.name, "euler-error")
    for i, sched in enumerate(schedules):
        t = sched.t
        m = _process_level(flow, t, tol_m)
        p = euler_epsilon(flow, t * 2.0 ** -m, t, t0, u)
        e = compose_euler(flow, sched, t0, u)
        measured = flow.dist(e, p)
        bound = euler_error_bound(omega, L, t, sched.mesh) + dyadic_tail_bound(omega, L, t, m)
        report.rows.append(ReportRow({"schedule": i, "t": t, "mesh": sched.mesh,
                                      "steps": len(sched), "level": m}, measured, bound))
    return report


def verify_k_chain(flow: LocalFlow, omega: OmegaModulus, u, t0: float, eps: float,
                   k_values: Iterable[int], h: int = 0) -> ConvergenceReport:
    """``d(F(k eps) v, F^eps(k eps) v) <= k^2 eps omega(eps)`` with ``v = F^eps(h eps) u``."""
    report = ConvergenceReport(flow.name, "k-chain")
    v = euler_epsilon(flow, eps, h * eps, t0, u) if h else u
    tbar = t0 + h * eps
    for k in k_values:
        one = flow.step(k * eps, tbar, v)
        many = euler_epsilon(flow, eps, k * eps, tbar, v)
        bound = k * k * eps * float(omega(eps))
        report.rows.append(ReportRow({"k": k, "h": h, "eps": eps}, flow.dist(one, many), bound))
    return report


def verify_hk_chain(flow: LocalFlow, omega: OmegaModulus, L: float, u, t0: float, eps: float,
                    pairs: Iterable[tuple]) -> ConvergenceReport:
    """``d(F^{k eps}(hk eps) u, F^eps(hk eps) u) <= L h k^2 eps omega(eps)``."""
    report = ConvergenceReport(flow.name, "hk-chain")
    for h, k in pairs:
        t = h * k * eps
        a = euler_epsilon(flow, k * eps, t, t0, u)
        b = euler_epsilon(flow, eps, t, t0, u)
        bound = L * h * k * k * eps * float(omega(eps))
        report.rows.append(ReportRow({"h": h, "k": k, "eps": eps}, flow.dist(a, b), bound))
    return report


def euler_error_rate(flow: LocalFlow, t: float, t0: float, u, meshes, reference) -> RateFit:
    """Log-log slope of ``d(F^Delta(t)u, reference)`` against the mesh ``Delta``."""
    errs = [flow.dist(euler_epsilon(flow, float(d), t, t0, u), reference) for d in meshes]
    return rate_fit(meshes, errs)
