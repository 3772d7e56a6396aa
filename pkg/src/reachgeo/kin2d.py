"""Normal geodesics of the 6D model ``(t, x, y, theta, v, a)`` of planar reaching.

Frame ``X1 = d/dt + v cos(theta) d/dx + v sin(theta) d/dy + a d/dv``,
``X2 = d/dtheta``, ``X3 = d/da``, orthonormal. With the momentum functions
``P1 = psi``, ``P2 = p_theta``, ``P3 = p_a`` the Hamiltonian is
``(P1^2 + P2^2 + P3^2) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geomcore import MODEL_2D, Covector2D, State2D, Trajectory, wrap_angle
from .odeint import GuardViolation, IntegrationError, StepControl, integrate

PSI_MIN = 1e-6
T_MAX = 1e3
THETA_TOL = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


class InfeasibleCurvatureError(ValueError):
    """Target heading is not reachable with the requested constant curvature."""


class ConnectivityError(ValueError):
    """The end-point linear system for the jerk coefficients is singular."""


@dataclass(frozen=True)
class HamState2D:
    state: State2D
    covector: Covector2D

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.state.as_array(), self.covector.as_array()])

    @classmethod
    def from_array(cls, arr) -> "HamState2D":
        arr = np.asarray(arr, dtype=float)
        return cls(State2D.from_array(arr[:6]), Covector2D.from_array(arr[6:]))


@dataclass(frozen=True)
class ControlPolynomials2D:
    """Constant curvature ``k`` and cubic jerk ``j0 + j1 t + j2 t^2/2 + j3 t^3/6``."""

    k: float = 0.0
    j0: float = 0.0
    j1: float = 0.0
    j2: float = 0.0
    j3: float = 0.0

    def __post_init__(self):
        for name in ("k", "j0", "j1", "j2", "j3"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def jerk_coefficients(self) -> np.ndarray:
        return np.array([self.j0, self.j1, self.j2, self.j3])

    def jerk(self, t):
        t = np.asarray(t, dtype=float)
        return self.j0 + self.j1 * t + self.j2 * t ** 2 / 2 + self.j3 * t ** 3 / 6


def momenta_2d(hs: HamState2D) -> tuple[float, float, float]:
    s, p = hs.state, hs.covector
    c, sn = math.cos(s.theta), math.sin(s.theta)
    p1 = s.v * (c * p.p_x + sn * p.p_y) + s.a * p.p_v + p.p_t
    return p1, p.p_theta, p.p_a


def hamiltonian_2d(hs: HamState2D) -> float:
    p1, p2, p3 = momenta_2d(hs)
    return 0.5 * (p1 * p1 + p2 * p2 + p3 * p3)


def hamiltonian_2d_array(y: np.ndarray) -> np.ndarray:
    """Vectorized Hamiltonian on rows ``state + covector``."""
    y = np.atleast_2d(y)
    psi = _psi_rows(y)
    return 0.5 * (psi ** 2 + y[:, 9] ** 2 + y[:, 11] ** 2)


def _psi_rows(y):
    th, v, a = y[:, 3], y[:, 4], y[:, 5]
    return v * (np.cos(th) * y[:, 7] + np.sin(th) * y[:, 8]) + a * y[:, 10] + y[:, 6]


def _psi(y) -> float:
    th = y[3]
    return y[4] * (math.cos(th) * y[7] + math.sin(th) * y[8]) + y[5] * y[10] + y[6]


def _rhs(s, y):
    t, x, yy, th, v, a, pt, px, py, pth, pv, pa = y
    c, sn = math.cos(th), math.sin(th)
    w = c * px + sn * py
    psi = v * w + a * pv + pt
    return np.array([
        psi, v * c * psi, v * sn * psi, pth, a * psi, pa,
        0.0, 0.0, 0.0, v * (sn * px - c * py) * psi, -w * psi, -pv * psi,
    ])


def _rhs_frozen(s, y):
    # theta' = 0 and p_theta' = 0: motion restricted to the initial heading.
    d = _rhs(s, y)
    d[3] = 0.0
    d[9] = 0.0
    return d


def ham_rhs_2d(hs: HamState2D) -> HamState2D:
    """Right-hand side of the normal geodesic equations, as a HamState2D.

    The theta component of the result is a rate and is therefore wrapped
    like any angle; use :func:`ham_rhs_2d_array` for raw values.
    """
    return HamState2D.from_array(_rhs(0.0, hs.as_array()))


def ham_rhs_2d_array(y) -> np.ndarray:
    return _rhs(0.0, np.asarray(y, dtype=float))


def _samples(span, samples):
    if samples is None:
        return None
    if np.isscalar(samples):
        return np.linspace(span[0], span[1], int(samples))
    return np.asarray(samples, dtype=float)


def flow_2d(
    initial: HamState2D,
    span: tuple[float, float] = (0.0, 1.0),
    ctrl: Optional[StepControl] = None,
    samples=201,
    admissible: bool = True,
    psi_min: float = PSI_MIN,
    freeze_theta: bool = False,
) -> Trajectory:
    """Integrate the normal geodesic flow; theta is kept unwrapped in the samples.

    ``freeze_theta`` integrates the reduced system with the theta and
    p_theta rows held constant.
    """
    guard = (lambda s, y: _psi(y) > psi_min) if admissible else None
    rhs = _rhs_frozen if freeze_theta else _rhs
    y0 = initial.as_array()
    try:
        sol = integrate(rhs, y0, span, ctrl, _samples(span, samples), guard)
    except IntegrationError as err:
        p = err.partial
        err.trajectory = Trajectory(p.s_nodes, p.y_nodes, MODEL_2D, p.steps)
        raise
    return Trajectory(sol.s, sol.y, MODEL_2D, sol.steps)


def _moment_matrix(theta0: float, k: float):
    """Columns: contribution of each j_i to (a(1), v(1), x(1), y(1))."""
    fact = [math.factorial(n) for n in range(8)]
    m = np.zeros((4, 4))
    th = theta0 + k * _GL_T
    c, s = np.cos(th), np.sin(th)
    for i in range(4):
        m[0, i] = 1.0 / fact[i + 1]
        m[1, i] = 1.0 / fact[i + 2]
        if k == 0.0:
            # int_0^1 t^(i+2)/(i+2)! dt in closed form.
            base = 1.0 / fact[i + 3]
            m[2, i] = base * math.cos(theta0)
            m[3, i] = base * math.sin(theta0)
        else:
            poly = _GL_T ** (i + 2) / fact[i + 2]
            m[2, i] = _GL_W @ (poly * c)
            m[3, i] = _GL_W @ (poly * s)
    return m


def _free_motion(start: State2D, k: float):
    """End point of the zero-jerk motion from ``start`` under curvature ``k``."""
    th0, v0, a0 = start.theta, start.v, start.a
    a1 = a0
    v1 = v0 + a0
    if k == 0.0:
        disp = v0 + a0 / 2
        return a1, v1, start.x + disp * math.cos(th0), start.y + disp * math.sin(th0)
    th = th0 + k * _GL_T
    vel = v0 + a0 * _GL_T
    return a1, v1, start.x + _GL_W @ (vel * np.cos(th)), start.y + _GL_W @ (vel * np.sin(th))


def connect_admissible_2d(start: State2D, target: State2D, k: float,
                          tol: float = 1e-8) -> ControlPolynomials2D:
    """Cubic jerk and constant curvature joining ``start`` (t=0) to ``target`` (t=1).

    Raises
    ------
    InfeasibleCurvatureError
        ``theta0 + k`` differs from ``theta1`` (mod 2 pi) by more than 1e-6 rad.
    ConnectivityError
        The end-point system cannot be solved to ``tol``; the message carries
        its condition number.
    """
    if abs(start.t) > 1e-12 or abs(target.t - 1.0) > 1e-12:
        raise ValueError("admissible connection is defined from t=0 to t=1")
    k = float(k)
    if abs(wrap_angle(start.theta + k - target.theta)) > THETA_TOL:
        raise InfeasibleCurvatureError(
            f"theta0 + k = {start.theta + k:.6g} does not reach theta1 = {target.theta:.6g}")
    m = _moment_matrix(start.theta, k)
    free = np.array(_free_motion(start, k))
    rhs = np.array([target.a, target.v, target.x, target.y]) - free
    j, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    resid = float(np.max(np.abs(m @ j - rhs)))
    if not resid <= tol * max(1.0, float(np.max(np.abs(rhs)))):
        raise ConnectivityError(
            f"end-point system unsolvable (residual {resid:.3g}, cond {np.linalg.cond(m):.3g})")
    return ControlPolynomials2D(k, *j)


def admissible_trajectory_2d(cp: ControlPolynomials2D, start: State2D, t_samples,
                             ctrl: Optional[StepControl] = None) -> Trajectory:
    """Integrate ``X1 + k X2 + j(t) X3`` from ``start`` and sample on ``t_samples``."""
    t_samples = np.asarray(t_samples, dtype=float)

    def rhs(t, y):
        th, v = y[3], y[4]
        return np.array([1.0, v * math.cos(th), v * math.sin(th), cp.k, y[5], float(cp.jerk(t))])

    y0 = start.as_array()
    ctrl = ctrl or StepControl.adaptive(1e-12)
    sol = integrate(rhs, y0, (start.t, float(t_samples[-1])), ctrl, t_samples)
    return Trajectory(sol.s, sol.y, MODEL_2D, sol.steps, has_covector=False)


class Reparam2D:
    """Time-parameterized admissible flow from the origin.

    ``psi`` is recovered from the conserved quantity
    ``psi^2 + p_theta^2 + p_a^2 = p_t^2 + k^2 + p_a(0)^2`` with
    ``k = p_theta(0)``, giving
    ``theta' = p_theta / psi`` and ``a' = p_a / psi``. The horizon is where
    the radicand vanishes (clamped to ``t_max``).
    """

    def __init__(self, covector: Covector2D, t_max: float = T_MAX,
                 ctrl: Optional[StepControl] = None, floor: float = 1e-12):
        if not covector.p_t > 0:
            raise ValueError("p_t must be positive")
        self.covector = covector
        self.k = covector.p_theta
        self.invariant = covector.p_t ** 2 + self.k ** 2 + covector.p_a ** 2
        p = covector
        self._px, self._py = p.p_x, p.p_y
        floor = floor * self.invariant
        y0 = np.array([0.0, 0.0, 0.0, 0.0, 0.0, p.p_theta, p.p_v, p.p_a])
        ctrl = ctrl or StepControl.adaptive(1e-12)
        try:
            self._sol = integrate(self._rhs, y0, (0.0, float(t_max)), ctrl,
                                  guard=lambda t, y: self._radicand(y) > floor)
            self.horizon = float(t_max)
        except GuardViolation as err:
            self._sol = err.partial
            self.horizon = err.partial.s_end
        except IntegrationError as err:
            # Step underflow at the square-root singularity also marks the horizon.
            if self._radicand(err.partial.y_end) > 1e-6 * self.invariant:
                raise
            self._sol = err.partial
            self.horizon = err.partial.s_end

    def _radicand(self, y) -> float:
        return self.invariant - y[5] ** 2 - y[7] ** 2

    def _rhs(self, t, y):
        x, yy, th, v, a, pth, pv, pa = y
        c, sn = math.cos(th), math.sin(th)
        psi = math.sqrt(max(self._radicand(y), 0.0))
        return np.array([
            v * c, v * sn, pth / psi, a, pa / psi,
            v * (sn * self._px - c * self._py), -(c * self._px + sn * self._py), -pv,
        ])

    def _eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError(f"t outside admissibility horizon [0, {self.horizon:.6g}]")
        return self._sol.dense(t)

    def psi(self, t):
        y = self._eval(t)
        return np.sqrt(self.invariant - y[:, 5] ** 2 - y[:, 7] ** 2)

    def theta_rate(self, t):
        y = self._eval(t)
        return y[:, 5] / np.sqrt(self.invariant - y[:, 5] ** 2 - y[:, 7] ** 2)

    def accel_rate(self, t):
        y = self._eval(t)
        return y[:, 7] / np.sqrt(self.invariant - y[:, 5] ** 2 - y[:, 7] ** 2)

    def __call__(self, t):
        return self.theta_rate(t), self.accel_rate(t)

    def trajectory(self, t_samples) -> Trajectory:
        """Samples in the model's column layout, parameterized by time."""
        t = np.asarray(t_samples, dtype=float)
        y = self._eval(t)
        p = self.covector
        n = t.size
        rows = np.column_stack([
            t, y[:, 0], y[:, 1], y[:, 2], y[:, 3], y[:, 4],
            np.full(n, p.p_t), np.full(n, p.p_x), np.full(n, p.p_y), y[:, 5], y[:, 6], y[:, 7],
        ])
        return Trajectory(t, rows, MODEL_2D)


def reparam_2d(covector: Covector2D, t_max: float = T_MAX,
               ctrl: Optional[StepControl] = None) -> Reparam2D:
    return Reparam2D(covector, t_max, ctrl)


def covector_from_controls(cp: ControlPolynomials2D, theta0: float,
                           p_t: float = 1.0) -> Covector2D:
    """Covector whose small-momentum geodesic approximates ``cp`` from ``theta0``.

    Matches ``p_a(t) ~ p_t j(t)`` to second order and fits the heading
    dependent third derivative ``cos(theta) p_x + sin(theta) p_y ~ p_t j''(t)``
    by least squares along ``theta(t) = theta0 + k t``.
    """
    t = _GL_T
    th = theta0 + cp.k * t
    a = np.column_stack([np.cos(th), np.sin(th)])
    target = p_t * (cp.j2 + cp.j3 * t)
    (px, py), *_ = np.linalg.lstsq(a * np.sqrt(_GL_W)[:, None], target * np.sqrt(_GL_W), rcond=None)
    return Covector2D(p_t=p_t, p_x=px, p_y=py, p_theta=p_t * cp.k,
                      p_v=-p_t * cp.j1, p_a=p_t * cp.j0)
