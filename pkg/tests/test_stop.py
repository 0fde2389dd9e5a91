import math

import numpy as np
import pytest

from metricflow.core import euler_epsilon
from metricflow.errors import NotInBody
from metricflow.flows import (
    ConvexBody,
    StopFlowConfig,
    disk_config,
    disk_solution,
    fit_projection_constant,
    project,
    projection_commutation_defect,
    projection_sweep,
    stop_flow,
    stop_step,
)
from metricflow.flows.stop import boundary_sweep, outward_rotation, sample_points

BODIES = [
    ConvexBody.ball([0.5, -0.2], 1.3),
    ConvexBody.box([0.0, 0.0], [1.0, 2.0]),
    ConvexBody.halfspace([1.0, 2.0], 0.5),
]


def test_body_validation():
    with pytest.raises(ValueError):
        ConvexBody.ball([0, 0], 0.0)
    with pytest.raises(ValueError):
        ConvexBody.box([0, 1], [1, 0])
    with pytest.raises(ValueError):
        ConvexBody.halfspace([0, 0], 1.0)


def test_projection_examples():
    assert np.array_equal(project(ConvexBody.ball([0, 0], 1.0), [2.0, 0.0]), [1.0, 0.0])
    assert np.array_equal(project(ConvexBody.box([0, 0], [1, 1]), [1.5, -0.2]), [1.0, 0.0])
    inside = np.array([0.1, 0.2])
    for body in BODIES[:2]:
        x = project(body, inside + [0.2, 0.3])
        assert np.array_equal(project(body, x), x)
    h = ConvexBody.halfspace([0.0, 1.0], 1.0)
    np.testing.assert_array_equal(project(h, [3.0, 5.0]), [3.0, 1.0])


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_projection_idempotent_and_nonexpansive(body, rng):
    for _ in range(300):
        x, y = rng.normal(scale=3.0, size=(2, 2))
        px, py = project(body, x), project(body, y)
        np.testing.assert_allclose(project(body, px), px, atol=1e-14)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) * (1 + 1e-12)
        assert body.contains(px)
        assert body.contains(x) == bool(np.linalg.norm(px - x) <= 1e-12)


def test_commutation_defect_zero_inside():
    disk = ConvexBody.ball([0, 0], 1.0)
    assert projection_commutation_defect(disk, [0.0, 0.0], [0.1, 0.1], 0.5, 0.5) == 0.0


def test_halfspace_defect_exactly_zero_on_dyadic_grid():
    body = ConvexBody.halfspace([0.0, 1.0], 0.0)
    grid = [k / 8 for k in range(-8, 1)]
    for ux in grid:
        for uy in grid:
            for v in ([0.5, 1.0], [-0.25, 0.75], [1.0, -0.5], [0.0, 2.0]):
                for tau in (0.125, 0.25, 0.5):
                    assert projection_commutation_defect(body, [ux, uy], v, tau, 0.25) == 0.0


def test_halfspace_defect_roundoff_on_random_inputs(rng):
    body = ConvexBody.halfspace([1.0, 2.0], 0.5)
    for _ in range(200):
        u = project(body, rng.normal(size=2))
        v = rng.normal(size=2)
        assert projection_commutation_defect(body, u, v, rng.uniform(0, 1), rng.uniform(0, 1)) < 1e-14


def test_disk_defect_example_and_fit():
    disk = ConvexBody.ball([0, 0], 1.0)
    d = projection_commutation_defect(disk, [1.0, 0.0], [0.0, 1.0], 0.1, 0.1)
    assert d > 0
    fits = projection_sweep(disk, np.geomspace(1e-3, 0.1, 8))
    K = max(f.K_max for f in fits)
    assert d <= K * 0.01
    assert min(f.r_squared for f in fits) >= 0.95


def test_fit_projection_constant_recovers_linear_law():
    disk = ConvexBody.ball([0, 0], 2.0)
    pts, dirs = boundary_sweep(disk, 5)
    fit = fit_projection_constant(disk, pts, dirs[:1], np.geomspace(1e-4, 1e-2, 6))
    assert fit.samples == 36
    assert fit.K <= fit.K_max
    assert fit.r_squared > 0.99


def test_stop_step_examples():
    disk = ConvexBody.ball([0, 0], 1.0)
    cfg = StopFlowConfig(disk, lambda t, u: np.array([0.0, 1.0]), 1.0, 0.0, 0.5)
    t = 0.3
    np.testing.assert_allclose(stop_step(cfg, t, 0.0, [1.0, 0.0]), np.array([1.0, t]) / math.sqrt(1 + t * t),
                               rtol=1e-15)
    zero = StopFlowConfig(disk, lambda t, u: np.zeros(2), 1.0, 0.0, 0.5)
    np.testing.assert_array_equal(stop_step(zero, 0.2, 0.0, [0.3, 0.4]), [0.3, 0.4])
    with pytest.raises(NotInBody):
        stop_step(cfg, 0.1, 0.0, [2.0, 0.0])


def test_stop_config_constants():
    cfg = disk_config()
    assert cfg.delta == pytest.approx(min(1.0 / (2 * math.sqrt(2)), 2.0))
    assert cfg.stability == pytest.approx(math.exp(math.sqrt(2) * 2.0))
    assert cfg.modulus.exponent == 1.0
    assert cfg.modulus.coefficient == pytest.approx((cfg.f_lip + cfg.K) * cfg.f_bound)
    assert 0.3 < cfg.K < 0.6


def test_one_step_contraction_factor(rng):
    cfg = disk_config()
    for _ in range(200):
        u, w = sample_points(cfg, rng, 2)
        tau = rng.uniform(0, cfg.delta)
        d1 = np.linalg.norm(stop_step(cfg, tau, 0.0, u) - stop_step(cfg, tau, 0.0, w))
        assert d1 <= math.exp(cfg.f_lip * tau) * np.linalg.norm(u - w) * (1 + 1e-12)


def test_disk_trajectory_reaches_and_stays_on_boundary():
    cfg = disk_config()
    flow = stop_flow(cfg)
    u0 = np.array([0.5, 0.0])
    eps = 2.0 ** -10
    for t in [1.0, 1.5, 2.0]:
        p = euler_epsilon(flow, eps, t, 0.0, u0)
        assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(p - disk_solution(t, (0.5, 0.0))) < 5e-3


def test_disk_solution_before_contact():
    np.testing.assert_allclose(disk_solution(0.5), 0.5 * math.exp(0.5) * np.array([math.cos(0.5), math.sin(0.5)]))
    np.testing.assert_allclose(outward_rotation(0.0, np.array([1.0, 2.0])), [-1.0, 3.0])
