"""Acceptance criteria, one test each.

Every test records a one-line verdict; the lines are printed in the pytest
terminal summary and also when this file is run as a script.
"""
import io
import math
import time
from pathlib import Path

import numpy as np
import pytest

from metricflow import analysis as an
from metricflow import cli
from metricflow.core import ProcessApprox, Schedule, dyadic_process, euler_epsilon
from metricflow.flows import (
    NILPOTENT_PAIR,
    ROTATION,
    ConvexBody,
    CounterexampleFlowConfig,
    HeatFlowConfig,
    ResolventFlowConfig,
    SplitFlowConfig,
    build_case,
    counterexample_f,
    disk_config,
    eq2_modulus_check,
    heat_flow,
    k_step_defect,
    projection_commutation_defect,
    projection_sweep,
    resolvent_flow,
    resolvent_identity_check,
    semigroup_defect,
    sine_profile,
    split_flow,
    stop_flow,
)
from metricflow.flows.heat import sample_profiles
from metricflow.flows.split import commutation_defect, sample_ball

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
VERDICTS = {}


def record(n, ok, detail):
    VERDICTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    assert ok, VERDICTS[n]


def test_criterion_1_heat_oracle():
    start = time.perf_counter()
    cfg = HeatFlowConfig(grid_size=256, domain_length=2 * math.pi)
    flow = heat_flow(cfg)
    u = sine_profile(cfg)
    t = 0.01
    res = dyadic_process(ProcessApprox(flow), t, 0.0, u, 1e-3)
    exact = math.exp(-(2 * math.pi / cfg.domain_length) ** 2 * t) * u
    err = flow.dist(res.state, exact)
    elapsed = time.perf_counter() - start
    record(1, err < 1e-3 and elapsed < 5.0,
           f"heat sup error {err:.3e} < 1e-3 at level {res.level}, runtime {elapsed:.2f}s < 5s")


def test_criterion_2_heat_rate():
    cfg = HeatFlowConfig()
    flow = heat_flow(cfg)
    states = sample_profiles(cfg, np.random.default_rng(2), 32)
    fit, samples = an.estimate_omega(flow, states, 0.0, np.geomspace(1e-3, 0.02, 7), k_max=4)
    dominated = all(s.normalized <= fit(s.tau) for s in samples)
    certified = all(s.normalized <= cfg.modulus(s.tau) for s in samples)
    record(2, 0.4 <= fit.exponent <= 0.6 and dominated and certified,
           f"fitted alpha {fit.exponent:.3f} in [0.4, 0.6]; fitted C={fit.coefficient:.3g} and "
           f"14M/3 dominate all {len(samples)} samples")


def test_criterion_3_resolvent():
    cfg = ResolventFlowConfig(ROTATION, delta=1.0, horizon=2.0)
    flow = resolvent_flow(cfg)
    u = np.array([1.0, 0.0])
    state = euler_epsilon(flow, 2.0 ** -14, 1.0, 0.0, u)
    exact = np.array([math.cos(1.0), -math.sin(1.0)])
    err = float(np.linalg.norm(state - exact))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        t, s = rng.uniform(1e-3, cfg.delta, 2)
        v = rng.normal(size=2)
        worst = max(worst, max(resolvent_identity_check(cfg, t, s, v)) / np.linalg.norm(v))
    fit, _ = an.estimate_omega(flow, sample_ball(2, 1.0, rng, 32), 0.0, np.geomspace(1e-3, 0.1, 7))
    record(3, err < 1e-4 and worst <= 1e-9 and 0.9 <= fit.exponent <= 1.1,
           f"m=14 error {err:.2e} < 1e-4; identity residual {worst:.1e} <= 1e-9; alpha {fit.exponent:.3f}")


def test_criterion_4_splitting():
    A, B = NILPOTENT_PAIR
    cfg = SplitFlowConfig.from_matrices(A, B, delta=0.5, horizon=1.0, radius=1.0)
    flow = split_flow(cfg)
    u = np.array([1.0, 0.0])
    res = dyadic_process(ProcessApprox(flow, empirical=True), 1.0, 0.0, u, 1e-5)
    exact = np.array([math.cosh(1.0), math.sinh(1.0)])
    err = float(np.linalg.norm(res.state - exact))

    D1, D2 = np.diag([-1.0, 0.5]), np.diag([0.3, -2.0])
    diag = SplitFlowConfig.from_matrices(D1, D2, radius=2.0)
    rng = np.random.default_rng(4)
    comm = max(commutation_defect(diag, t, v) for t in (0.01, 0.1, 0.25)
               for v in sample_ball(2, 2.0, rng, 20))

    ok_k = True
    for v in sample_ball(2, 1.0, rng, 20):
        for tau in (0.05, 0.02, 0.005):
            for k in range(1, 9):
                lhs = flow.dist(flow.step(k * tau, tau, flow.step(tau, 0.0, v)), flow.step((k + 1) * tau, 0.0, v))
                rhs = cfg.lip1 * cfg.lip2 * k * tau * float(cfg.commutation_omega(tau))
                ok_k &= lhs <= rhs * (1 + 1e-6)
    record(4, err < 1e-4 and comm <= 1e-12 and ok_k,
           f"oracle error {err:.2e} < 1e-4 (level {res.level}); commuting defect {comm:.1e}; "
           f"k-step bound for k<=8 {'holds' if ok_k else 'fails'}")


def test_criterion_5_stop():
    cfg = disk_config()
    flow = stop_flow(cfg)
    u = np.array([0.5, 0.0])
    a = euler_epsilon(flow, 2.0 ** -12, 1.0, 0.0, u)
    b = euler_epsilon(flow, 2.0 ** -18, 1.0, 0.0, u)
    gap = float(np.linalg.norm(a - b))
    fits = projection_sweep(cfg.body, np.geomspace(1e-3, 0.1, 8))
    r2 = min(f.r_squared for f in fits)
    half = ConvexBody.halfspace([0.0, 1.0], 0.0)
    grid = [k / 8 for k in range(-8, 1)]
    hs = max(projection_commutation_defect(half, [x, y], v, tau, tau2)
             for x in grid for y in grid for v in ([0.5, 1.0], [-0.25, 0.75], [1.0, -0.5])
             for tau in (0.125, 0.25, 0.5) for tau2 in (0.125, 0.25))
    record(5, gap < 1e-3 and r2 >= 0.95 and hs == 0.0,
           f"m=12 vs m=18 gap {gap:.2e} < 1e-3; worst per-direction r^2 {r2:.4f} >= 0.95; halfspace defect {hs}")


def _bound_suite(kind):
    c = build_case(kind)
    f, om, L = c.flow, c.flow.omega, c.flow.stability
    d = f.delta
    T = min(f.horizon, 1.0)
    m0 = ProcessApprox(f).min_level(d)
    reports = [
        an.verify_dyadic_pairs(f, om, L, d, 0.0, c.initial, range(m0, m0 + 12), max_gap=10),
        an.verify_tangency(f, om, L, [d, d / 2, d / 4, d / 8], 0.0, c.initial, 12),
    ]
    ratio = 0.95 if kind == "heat" else 0.8
    scheds = [Schedule.uniform(T, e) for e in (d, d / 2, d / 4, d / 8)]
    scheds += [Schedule.geometric(T, n, ratio) for n in (16, 32, 64)]
    scheds = [s for s in scheds if s.mesh <= d]
    assert any(len(set(np.round(s.increments, 12))) > 2 for s in scheds)
    reports.append(an.verify_euler_error(f, om, L, scheds, 0.0, c.initial, 12))
    return reports


def test_criterion_6_bound_suite():
    rows, failed = 0, []
    for kind in ("heat", "stop", "split", "resolvent"):
        for rep in _bound_suite(kind):
            rows += len(rep.rows)
            failed += [(kind, rep.check, r.params) for r in rep.failures()]
    record(6, not failed, f"{rows} rows over heat/stop/split/resolvent, {len(failed)} failing")


def test_criterion_7_counterexample():
    cfg = CounterexampleFlowConfig()
    scaling = max(abs(counterexample_f(cfg, 2.0 ** n * t) - counterexample_f(cfg, t) ** (2 ** n))
                  for t in np.linspace(1.0, 2.0, 41) for n in range(11))
    taus = [0.5 * 2.0 ** -j for j in range(24)]
    chk = eq2_modulus_check(cfg, taus)
    k1_dyadic = float(np.max(chk.two_step))
    rng = np.random.default_rng(7)
    k1_random = max(k_step_defect(cfg, x, 1) for x in rng.uniform(1e-3, 1.0, 200))
    defect = semigroup_defect(cfg, 1.0, 0.5)
    record(7, scaling <= 1e-12 and k1_dyadic == 0.0 and k1_random <= 1e-15 and defect > 0.01 and chk.floor > 0.05,
           f"scaling {scaling:.1e}; k=1 defect {k1_dyadic} on the subsequence (<= {k1_random:.1e} elsewhere); "
           f"semigroup defect {defect:.5f} at (1, 0.5); k=2 floor {chk.floor:.4f}")


def test_criterion_8_determinism(tmp_path):
    configs = sorted(CONFIGS.glob("*.toml"))
    differing = []
    for p in configs:
        outs = []
        for i, jobs in enumerate((1, 4)):
            d = tmp_path / f"{p.stem}-{i}"
            code = cli.run(p, str(d), jobs=jobs, out=io.StringIO())
            assert code == 0, f"{p.name} exited {code}"
            outs.append(b"".join(f.read_bytes() for f in sorted(d.iterdir())))
        if outs[0] != outs[1]:
            differing.append(p.name)
    record(8, not differing, f"{len(configs)} shipped configs byte-identical across repeated runs "
                             f"({len(differing)} differ)")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
