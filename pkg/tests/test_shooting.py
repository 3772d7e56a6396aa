import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachgeo.engel1d import HamState1D, flow_1d
from reachgeo.geomcore import Covector1D, State1D
from reachgeo.kin2d import hamiltonian_2d_array
from reachgeo.minjerk import QuinticReach, quintic_position
from reachgeo.odeint import GuardViolation, StepControl
from reachgeo.shooting import (
    MODEL_1D, MODEL_2D, MODEL_2D_FROZEN, BoundarySpec, Fixed, Free, Interval, NonConvergenceError,
    ShootingOptions, SpecError, fd_jacobian, projected_start, residual, solve,
    solve_constrained_theta, start_lattice,
)

REST_1D = {"t": 0, "x": 0, "v": 0, "a": 0}


def reach_1d(x1):
    return BoundarySpec.from_values(MODEL_1D, REST_1D, {"t": 1, "x": x1, "v": 0, "a": 0})


def straight_2d(theta, d):
    return BoundarySpec.from_values(
        MODEL_2D, {"t": 0, "x": 0, "y": 0, "theta": theta, "v": 0, "a": 0},
        {"t": 1, "x": d * math.cos(theta), "y": d * math.sin(theta), "theta": theta, "v": 0, "a": 0})


def test_bc_residual_has_four_components():
    g = residual([1.0, 0.0, 0.0, 0.0], reach_1d(0.01))
    assert g.shape == (4,)
    # Pure time flow: only the position misses.
    np.testing.assert_allclose(g, [0, -0.01, 0, 0], atol=1e-12)


def test_residual_round_trip():
    beta = np.array([1.0, 0.2, -0.1, 0.15])
    hs = HamState1D(State1D(0, 0, 0, 0), Covector1D(*beta))
    end = flow_1d(hs, (0, 1), StepControl.adaptive(1e-11), [0, 1]).y[-1]
    spec = BoundarySpec.from_values(MODEL_1D, REST_1D, dict(zip(("t", "x", "v", "a"), end[:4])))
    assert np.max(np.abs(residual(beta, spec))) < 1e-9


def test_jacobian_matches_directional_differences():
    spec = reach_1d(0.01)
    opts = ShootingOptions()
    beta = np.array([1.0, 0.1, -0.2, 0.05])
    jac = fd_jacobian(beta, spec, opts)
    rng = np.random.default_rng(3)
    for _ in range(3):
        d = rng.normal(size=4)
        d /= np.linalg.norm(d)
        eps = 1e-4
        central = (residual(beta + eps * d, spec, opts) - residual(beta - eps * d, spec, opts)) / (2 * eps)
        np.testing.assert_allclose(jac @ d, central, atol=1e-4)


def test_spec_issues():
    spec = BoundarySpec.from_values(MODEL_1D, REST_1D, {"t": 1, "x": 0.1, "v": 0})
    assert any("non-square" in m for m in spec.issues())
    spec = BoundarySpec.from_values(MODEL_1D, REST_1D, {"t": 1, "x": (0, 1), "v": 0, "a": 0})
    assert any("intervals allowed only" in m for m in spec.issues())
    spec = BoundarySpec.from_values(MODEL_1D, {"t": 0, "x": 0, "v": 0}, {"t": 1, "x": 0, "v": 0, "a": 0})
    assert any("initial a" in m for m in spec.issues())
    with pytest.raises(SpecError):
        BoundarySpec.from_values(MODEL_1D, {"q": 1}, {})
    with pytest.raises(SpecError):
        solve(BoundarySpec.from_values(MODEL_2D, {}, {}))


def test_interval_specs_must_be_expanded():
    spec = BoundarySpec.from_values(MODEL_1D, REST_1D, {"t": 1, "x": 0.01, "v": 0, "a": (-1, 1)})
    assert spec.issues() == []
    with pytest.raises(SpecError, match="expanded"):
        solve(spec)


def test_lattice_shape_and_positive_time_momentum():
    opts = ShootingOptions()
    lat = start_lattice(straight_2d(0.3, 0.01), opts)
    assert len(lat) == 3 ** 6
    assert all(b[0] > 0 for b in lat)
    lat = start_lattice(straight_2d(0.3, 0.01), dataclasses.replace(opts, delta=3.0))
    assert min(b[0] for b in lat) > 0


def test_small_reach_matches_quintic():
    r = solve(reach_1d(0.01))
    assert r.converged and r.residual_norm <= 1e-8
    t = r.trajectory.col("t")
    x, _ = quintic_position(QuinticReach(0, 0, 0.01, 0, 1.0), np.clip(t, 0, 1))
    assert np.max(np.abs(r.trajectory.col("x") - x)) / 0.01 < 2e-2


def test_solution_conserves_hamiltonian():
    r = solve(straight_2d(0.7, 0.02))
    h = hamiltonian_2d_array(r.trajectory.y)
    assert np.ptp(h) <= 1e-8


def test_frozen_heading_path_is_collinear():
    theta = 5 * math.pi / 6
    r = solve_constrained_theta(straight_2d(theta, 0.02), theta)
    assert r.converged
    x, y = r.trajectory.col("x"), r.trajectory.col("y")
    assert np.max(np.abs(x * math.sin(theta) - y * math.cos(theta))) <= 1e-8
    speed = r.trajectory.col("v")
    peak = int(np.argmax(speed))
    assert 0 < peak < speed.size - 1
    assert np.all(np.diff(speed[:peak + 1]) >= -1e-12) and np.all(np.diff(speed[peak:]) <= 1e-12)


def test_frozen_at_zero_heading_equals_1d_solve():
    r2 = solve_constrained_theta(straight_2d(0.0, 0.01), 0.0)
    r1 = solve(reach_1d(0.01))
    np.testing.assert_allclose(r2.trajectory.col("x"), r1.trajectory.col("x"), atol=1e-9)
    np.testing.assert_allclose(r2.trajectory.col("v"), r1.trajectory.col("v"), atol=1e-8)
    assert np.all(np.abs(r2.trajectory.col("y")) <= 1e-12)


def test_frozen_spec_rules():
    spec = straight_2d(0.2, 0.01)
    frozen = BoundarySpec(MODEL_2D_FROZEN, spec.initial, spec.final)
    assert any("must be free" in m for m in frozen.issues())
    with pytest.raises(SpecError):
        solve_constrained_theta(reach_1d(0.01), 0.0)


def test_projected_start_lifts_along_heading():
    spec = straight_2d(1.1, 0.02)
    frozen = BoundarySpec(MODEL_2D_FROZEN, spec.initial,
                          spec.final[:3] + (Free(),) + spec.final[4:])
    beta = projected_start(frozen, ShootingOptions())
    assert beta is not None
    # (p_x, p_y) is parallel to the heading.
    assert abs(beta[1] * math.sin(1.1) - beta[2] * math.cos(1.1)) <= 1e-12 * max(1.0, abs(beta[1]))
    off = BoundarySpec(MODEL_2D_FROZEN, spec.initial,
                       (Fixed(1), Fixed(0.01), Fixed(0.0), Free(), Fixed(0), Fixed(0)))
    assert projected_start(off, ShootingOptions()) is None


@pytest.mark.parametrize("a1", [-2 * math.pi / 5, -0.35 * math.pi, -3 * math.pi / 10])
def test_final_acceleration_family_with_frozen_heading(a1):
    th = math.pi / 6
    spec = BoundarySpec.from_values(
        MODEL_2D, {"t": 0, "x": 0, "y": 0, "theta": th, "v": 0, "a": 3 * math.pi / 8},
        {"t": 1, "x": 0.19 * math.cos(th), "y": 0.19 * math.sin(th), "theta": th, "v": 0, "a": a1})
    r = solve_constrained_theta(spec, th)
    assert r.converged and r.residual_norm <= 1e-8


@pytest.mark.slow
def test_prescribed_direction_curved_reach():
    spec = BoundarySpec.from_values(
        MODEL_2D, {"t": 0, "x": 0, "y": 0, "theta": math.pi / 3, "v": 0, "a": math.pi / 3},
        {"t": 1, "x": 0.153848, "y": 0.132282, "theta": math.pi / 8, "v": 0, "a": -9 * math.pi / 20})
    r = solve(spec)
    assert r.converged and r.residual_norm <= 1e-8


def test_unreachable_target_reports_best_attempt():
    opts = ShootingOptions(continuation=False, max_starts=1, max_iter=15)
    with pytest.raises(NonConvergenceError) as info:
        solve(reach_1d(1.0), opts)
    err = info.value
    assert err.best is not None and err.best.residual_norm > 1e-8
    assert err.attempts


def test_deterministic_with_fixed_step():
    opts = ShootingOptions(ctrl=StepControl.fixed(0.01))
    a = solve(reach_1d(0.01), opts)
    b = solve(reach_1d(0.01), opts)
    assert np.array_equal(a.beta0, b.beta0)
    assert np.array_equal(a.trajectory.y, b.trajectory.y)


@settings(max_examples=6)
@given(st.floats(0.8, 1.5), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_round_trip_recovers_generator_trajectory(p_t, p_x, p_v, p_a):
    hs = HamState1D(State1D(0, 0, 0, 0), Covector1D(p_t, p_x, p_v, p_a))
    try:
        gen = flow_1d(hs, (0, 1), StepControl.adaptive(1e-10), 101)
    except GuardViolation:
        return
    spec = BoundarySpec.from_values(MODEL_1D, REST_1D, dict(zip(("t", "x", "v", "a"), gen.y[-1, :4])))
    r = solve(spec)
    np.testing.assert_allclose(r.trajectory.y[:, :4], gen.y[:, :4], atol=1e-6)
