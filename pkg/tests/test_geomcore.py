import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from reachgeo.geomcore import (
    MODEL_1D, MODEL_2D, DimensionError, HorizontalControls, State1D, State2D, Trajectory,
    curve_energy, curve_length, eval_fields_1d, eval_fields_2d, wrap_angle,
)

finite = st.floats(-50, 50, allow_nan=False)


def straight_1d(n=201):
    s = np.linspace(0.0, 1.0, n)
    y = np.zeros((n, 4))
    y[:, 0] = s
    return Trajectory(s, y, MODEL_1D, has_covector=False)


def straight_2d(n=201):
    s = np.linspace(0.0, 1.0, n)
    y = np.zeros((n, 6))
    y[:, 0] = s
    return Trajectory(s, y, MODEL_2D, has_covector=False)


def controls(traj, j, k=None):
    return HorizontalControls(traj.s, 1.0, j, k)


def test_fields_1d_at_origin():
    x1, x2 = eval_fields_1d(State1D(0, 0, 0, 0))
    assert x1.tolist() == [1, 0, 0, 0]
    assert x2.tolist() == [0, 0, 0, 1]


def test_fields_1d_substitution():
    x1, _ = eval_fields_1d(State1D(1, 2, 3, 4))
    assert x1.tolist() == [1, 3, 4, 0]
    x1, _ = eval_fields_1d(State1D(0, 0, -1, 0.5))
    assert x1.tolist() == [1, -1, 0.5, 0]


def test_fields_2d_substitution():
    x1, x2, x3 = eval_fields_2d(State2D(0, 0, 0, 0, 1, 0))
    np.testing.assert_allclose(x1, [1, 1, 0, 0, 0, 0])
    x1, x2, x3 = eval_fields_2d(State2D(0, 0, 0, math.pi / 2, 2, 3))
    np.testing.assert_allclose(x1, [1, 0, 2, 0, 3, 0], atol=1e-15)
    assert x2.tolist() == [0, 0, 0, 1, 0, 0]
    assert x3.tolist() == [0, 0, 0, 0, 0, 1]


@given(finite, finite, finite, finite)
def test_fields_2d_reduce_to_1d_at_zero_heading(t, x, v, a):
    f1 = eval_fields_1d(State1D(t, x, v, a))
    f2 = eval_fields_2d(State2D(t, x, 0.0, 0.0, v, a))
    keep = [0, 1, 4, 5]
    np.testing.assert_array_equal(f2[0][keep], f1[0])
    np.testing.assert_array_equal(f2[2][keep], f1[1])


def test_state2d_wraps_heading():
    s = State2D(0, 0, 0, 3 * math.pi, 0, 0)
    assert s.theta == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_states_reject_non_finite():
    with pytest.raises(ValueError):
        State1D(0, float("nan"), 0, 0)


def test_length_of_straight_flow_is_one():
    traj = straight_1d()
    assert curve_length(traj, controls(traj, 0.0)) == pytest.approx(1.0, abs=1e-14)
    traj = straight_2d()
    assert curve_length(traj, controls(traj, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-14)


def test_length_of_linear_jerk_matches_closed_form():
    traj = straight_1d(2001)
    closed = 0.5 * (math.sqrt(2.0) + math.asinh(1.0))
    oracle, _ = quad(lambda t: math.sqrt(1 + t * t), 0, 1, epsabs=1e-13)
    assert closed == pytest.approx(oracle, abs=1e-12)
    assert curve_length(traj, controls(traj, traj.s)) == pytest.approx(closed, abs=1e-7)


def test_energy_examples():
    traj = straight_1d(2001)
    assert curve_energy(traj, controls(traj, 0.0)) == pytest.approx(0.5)
    c = controls(traj, 1.0)
    assert curve_energy(traj, c) == pytest.approx(1.0)
    assert curve_length(traj, c) == pytest.approx(math.sqrt(2))
    assert curve_energy(traj, c) == pytest.approx(0.5 * curve_length(traj, c) ** 2)
    assert curve_energy(traj, controls(traj, traj.s)) == pytest.approx(2 / 3, abs=1e-7)


def test_mismatched_grid_raises():
    traj = straight_1d(11)
    with pytest.raises(DimensionError):
        curve_length(traj, HorizontalControls(np.linspace(0, 1, 5), 1.0, 0.0))
    with pytest.raises(DimensionError):
        curve_length(traj, controls(traj, 0.0, 0.0))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_cauchy_schwarz_between_length_and_energy(jc, kc):
    traj = straight_2d(101)
    j = np.polynomial.polynomial.polyval(traj.s, jc)
    k = np.polynomial.polynomial.polyval(traj.s, kc)
    c = controls(traj, j, k)
    l, e = curve_length(traj, c), curve_energy(traj, c)
    assert l * l <= 2.0 * e * (1 + 1e-12) + 1e-12


def test_quadrature_is_second_order():
    errs = []
    exact = 0.5 * (math.sqrt(2.0) + math.asinh(1.0))
    for n in (41, 81, 161):
        traj = straight_1d(n)
        errs.append(abs(curve_length(traj, controls(traj, traj.s)) - exact))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_trajectory_requires_increasing_parameter():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], np.zeros((2, 4)), MODEL_1D, has_covector=False)


def test_trajectory_column_access():
    y = np.arange(16.0).reshape(2, 8)
    traj = Trajectory([0.0, 1.0], y, MODEL_1D)
    assert traj.col("p_x").tolist() == [5.0, 13.0]
    assert traj.state(1).a == 11.0
    assert traj.covector(0).p_a == 7.0
