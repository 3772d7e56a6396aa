import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from reachgeo.engel1d import (
    HamState1D, JerkPolynomial, admissible_trajectory_1d, connect_admissible_1d, flow_1d,
    ham_rhs_1d, hamiltonian_1d, reparam_accel_1d,
)
from reachgeo.geomcore import (
    Covector1D, State1D, curve_length, horizontal_speed_factor, native_controls,
)
from reachgeo.odeint import GuardViolation, StepControl
from reachgeo.setgeo import geodesic_length

TOL = StepControl.adaptive(1e-10)
small = st.floats(-0.5, 0.5)


def origin(p_t=1.0, p_x=0.0, p_v=0.0, p_a=0.0):
    return HamState1D(State1D(0, 0, 0, 0), Covector1D(p_t, p_x, p_v, p_a))


def symplectic_gradient(y, eps=1e-6):
    """(dH/dp, -dH/dq) by central differences."""
    g = np.zeros(8)
    for i in range(8):
        d = np.zeros(8)
        d[i] = eps
        hp = hamiltonian_1d(HamState1D.from_array(y + d))
        hm = hamiltonian_1d(HamState1D.from_array(y - d))
        g[i] = (hp - hm) / (2 * eps)
    return np.concatenate([g[4:], -g[:4]])


def test_hamiltonian_values():
    assert hamiltonian_1d(HamState1D(State1D(0, 0, 0, 0), Covector1D(0, 0, 0, 0))) == 0.0
    assert hamiltonian_1d(origin()) == 0.5
    hs = HamState1D(State1D(0, 0, 2, 1), Covector1D(0.5, 1, -1, 2))
    assert hamiltonian_1d(hs) == pytest.approx(3.125)


def test_rhs_pure_time_flow():
    d = ham_rhs_1d(origin()).as_array()
    assert d.tolist() == [1, 0, 0, 0, 0, 0, 0, 0]


def test_rhs_jerk_only():
    hs = HamState1D(State1D(0, 0, 0, 0), Covector1D(0, 0, 0, 0.7))
    d = ham_rhs_1d(hs).as_array()
    assert d[3] == 0.7
    assert np.count_nonzero(d) == 1


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_rhs_is_symplectic_gradient(vals):
    y = np.array(vals)
    np.testing.assert_allclose(ham_rhs_1d(HamState1D.from_array(y)).as_array(),
                               symplectic_gradient(y), atol=1e-6)


def test_straight_flow():
    traj = flow_1d(origin(), (0, 1), TOL, 11)
    np.testing.assert_allclose(traj.col("t"), traj.s, atol=1e-14)
    for c in ("x", "v", "a"):
        assert np.all(traj.col(c) == 0)


def test_flow_matches_scipy():
    hs = origin(1.0, 0.3, -0.2, 0.4)
    traj = flow_1d(hs, (0, 1), StepControl.adaptive(1e-11), 21)

    def rhs(s, y):
        return ham_rhs_1d(HamState1D.from_array(y)).as_array()

    ref = solve_ivp(rhs, (0, 1), hs.as_array(), t_eval=traj.s, rtol=1e-12, atol=1e-12,
                    method="DOP853")
    np.testing.assert_allclose(traj.y, ref.y.T, atol=1e-9)


@given(st.floats(0.5, 2), small, small, small)
def test_flow_conservation(p_t, p_x, p_v, p_a):
    try:
        traj = flow_1d(origin(p_t, p_x, p_v, p_a), (0, 1), TOL, 101)
    except GuardViolation:
        return
    y = traj.y
    h = np.array([hamiltonian_1d(HamState1D.from_array(r)) for r in y])
    assert np.max(np.abs(h - h[0])) <= 1e-8
    assert np.ptp(traj.col("p_t")) <= 1e-10
    assert np.ptp(traj.col("p_x")) <= 1e-10
    t = traj.col("t")
    assert np.max(np.abs(traj.col("p_v") + p_x * t - p_v)) <= 1e-8
    assert np.max(np.abs(traj.col("p_a") - (0.5 * p_x * t * t - p_v * t + p_a))) <= 1e-8
    speed = horizontal_speed_factor(traj) ** 2 + traj.col("p_a") ** 2
    assert np.ptp(speed) <= 1e-8


def test_length_is_span_times_speed():
    # Length in the native parameter equals span * sqrt(alpha1^2 + alpha2^2).
    hs = origin(1.2, 0.4, -0.3, 0.2)
    traj = flow_1d(hs, (0, 1), TOL, 2001)
    expected = 1.0 * math.sqrt(2 * hamiltonian_1d(hs))
    assert geodesic_length(traj) == pytest.approx(expected, rel=1e-9)
    assert curve_length(traj, native_controls(traj)) == pytest.approx(expected, rel=1e-9)


def test_guard_stops_non_admissible_flow():
    with pytest.raises(GuardViolation):
        flow_1d(origin(0.1, 0.0, 2.0, 0.0), (0, 1), TOL)
    traj = flow_1d(origin(0.1, 0.0, 2.0, 0.0), (0, 1), TOL, admissible=False)
    assert np.min(horizontal_speed_factor(traj)) < 0


def test_connect_zero_target():
    jp = connect_admissible_1d((0, 0, 0))
    assert (jp.e0, jp.e1, jp.e2) == (0.0, 0.0, 0.0)


def test_connect_unit_reach_matches_quintic_jerk():
    # The quintic 10t^3 - 15t^4 + 6t^5 has jerk 60 - 360 t + 360 t^2.
    jp = connect_admissible_1d((1, 0, 0))
    assert (jp.e0, jp.e1, jp.e2) == pytest.approx((60, -360, 720))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_connect_round_trip_by_integration(x1, v1, a1):
    jp = connect_admissible_1d((x1, v1, a1))
    traj = admissible_trajectory_1d(jp, np.linspace(0, 1, 5))
    np.testing.assert_allclose(traj.y[-1, 1:], [x1, v1, a1], atol=1e-10)

    def rhs(t, y):
        return [y[1], y[2], float(jp(t))]

    ref = solve_ivp(rhs, (0, 1), [0, 0, 0], rtol=1e-12, atol=1e-12, method="DOP853")
    np.testing.assert_allclose(ref.y[:, -1], [x1, v1, a1], atol=1e-8)


def test_connect_with_start_and_duration():
    jp = connect_admissible_1d((0.5, 0.1, -0.2), start=(0.1, 0.3, 0.2), T=2.0)
    x, v, a = jp.integrate(2.0, (0.1, 0.3, 0.2))
    assert (x, v, a) == pytest.approx((0.5, 0.1, -0.2), abs=1e-12)


def test_reparam_trivial_and_horizon():
    r = reparam_accel_1d(1.0, 0.0, 0.0, 0.0, t_max=50.0)
    assert r.horizon == 50.0
    assert np.all(r(np.linspace(0, 50, 7)) == 0)
    r = reparam_accel_1d(1.5, 0.6, 0.0, 0.0)
    assert r.horizon == pytest.approx(1.5 / 0.6)
    with pytest.raises(ValueError):
        r(r.horizon + 0.1)
    with pytest.raises(ValueError):
        reparam_accel_1d(0.0, 0.1, 0.1, 0.1)


@given(st.floats(0.5, 2), small, small, small)
def test_reparam_matches_flow(p_t, p_x, p_v, p_a):
    try:
        traj = flow_1d(origin(p_t, p_x, p_v, p_a), (0, 1), TOL, 51)
    except GuardViolation:
        return
    r = reparam_accel_1d(p_t, p_v, p_a, p_x)
    t = traj.col("t")
    if t[-1] > r.horizon:
        return
    alt = r.trajectory(t, StepControl.adaptive(1e-11))
    np.testing.assert_allclose(alt.y[:, 1:4], traj.y[:, 1:4], atol=1e-6)
    # h^2 + p_a^2 = p_t^2 + p_a(0)^2 along the time-parameterized route.
    inv = r.h(t) ** 2 + r.p_a(t) ** 2
    assert np.max(np.abs(inv - (p_t ** 2 + p_a ** 2))) <= 1e-8


def test_connection_length_bounds_distance():
    jp = connect_admissible_1d((0.01, 0, 0))
    t = np.linspace(0, 1, 2001)
    traj = admissible_trajectory_1d(jp, t)
    from reachgeo.geomcore import HorizontalControls
    upper = curve_length(traj, HorizontalControls(t, 1.0, jp(t)))
    assert upper >= 1.0
