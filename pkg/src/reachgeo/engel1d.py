"""Normal geodesics of the 2-jet (Engel-type) model of 1D reaching.

Horizontal frame ``X1 = d/dt + v d/dx + a d/dv``, ``X2 = d/da`` with the
metric making it orthonormal. The Hamiltonian is
``H = ((v p_x + a p_v + p_t)^2 + p_a^2) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geomcore import MODEL_1D, Covector1D, State1D, Trajectory
from .odeint import IntegrationError, StepControl, integrate

H_MIN = 1e-6
T_MAX = 1e3

# Inverse of the end-point matrix of a' = e0 + e1 t + e2 t^2/2 on [0, 1].
# Rows of the forward matrix: a(1), v(1), x(1).
_D = np.array([
    [1.0, 1 / 2, 1 / 6],
    [1 / 2, 1 / 6, 1 / 24],
    [1 / 6, 1 / 24, 1 / 120],
])
_D_INV = np.array([
    [3.0, -24.0, 60.0],
    [-24.0, 168.0, -360.0],
    [60.0, -360.0, 720.0],
])


@dataclass(frozen=True)
class HamState1D:
    state: State1D
    covector: Covector1D

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.state.as_array(), self.covector.as_array()])

    @classmethod
    def from_array(cls, arr) -> "HamState1D":
        arr = np.asarray(arr, dtype=float)
        return cls(State1D.from_array(arr[:4]), Covector1D.from_array(arr[4:]))


@dataclass(frozen=True)
class JerkPolynomial:
    """Jerk ``j(t) = e0 + e1 t + e2 t^2 / 2``."""

    e0: float = 0.0
    e1: float = 0.0
    e2: float = 0.0

    def __post_init__(self):
        for name in ("e0", "e1", "e2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.e0 + self.e1 * t + 0.5 * self.e2 * t * t

    def integrate(self, t, start: Sequence[float] = (0.0, 0.0, 0.0)):
        """Closed-form ``(x, v, a)`` at ``t`` from ``start = (x0, v0, a0)``."""
        t = np.asarray(t, dtype=float)
        x0, v0, a0 = start
        e0, e1, e2 = self.e0, self.e1, self.e2
        a = a0 + e0 * t + e1 * t ** 2 / 2 + e2 * t ** 3 / 6
        v = v0 + a0 * t + e0 * t ** 2 / 2 + e1 * t ** 3 / 6 + e2 * t ** 4 / 24
        x = (x0 + v0 * t + a0 * t ** 2 / 2 + e0 * t ** 3 / 6 + e1 * t ** 4 / 24
             + e2 * t ** 5 / 120)
        return x, v, a


def hamiltonian_1d(hs: HamState1D) -> float:
    s, p = hs.state, hs.covector
    h = s.v * p.p_x + s.a * p.p_v + p.p_t
    return 0.5 * (h * h + p.p_a * p.p_a)


def _h(y) -> float:
    return y[2] * y[5] + y[3] * y[6] + y[4]


def _rhs(s, y):
    t, x, v, a, pt, px, pv, pa = y
    h = v * px + a * pv + pt
    return np.array([h, v * h, a * h, pa, 0.0, 0.0, -px * h, -pv * h])


def ham_rhs_1d(hs: HamState1D) -> HamState1D:
    """Right-hand side of the normal geodesic equations, as a HamState1D."""
    return HamState1D.from_array(_rhs(0.0, hs.as_array()))


def hamiltonian_1d_array(y: np.ndarray) -> np.ndarray:
    """Vectorized Hamiltonian on rows ``(t, x, v, a, p_t, p_x, p_v, p_a)``."""
    y = np.atleast_2d(y)
    h = y[:, 2] * y[:, 5] + y[:, 3] * y[:, 6] + y[:, 4]
    return 0.5 * (h * h + y[:, 7] ** 2)


def _samples(span, samples):
    if samples is None:
        return None
    if np.isscalar(samples):
        return np.linspace(span[0], span[1], int(samples))
    return np.asarray(samples, dtype=float)


def flow_1d(
    initial: HamState1D,
    span: tuple[float, float] = (0.0, 1.0),
    ctrl: Optional[StepControl] = None,
    samples=201,
    admissible: bool = True,
    h_min: float = H_MIN,
) -> Trajectory:
    """Integrate the normal geodesic flow from ``initial``.

    With ``admissible=True`` the flow is stopped (``GuardViolation``) as soon
    as the ``X1`` coefficient ``h`` drops to ``h_min``. ``samples`` is a count
    of equispaced points, an explicit grid, or ``None`` for the step nodes.

    Raises
    ------
    IntegrationError
        On step-control failure; ``err.trajectory`` holds the partial flow.
    """
    guard = (lambda s, y: _h(y) > h_min) if admissible else None
    try:
        sol = integrate(_rhs, initial.as_array(), span, ctrl, _samples(span, samples), guard)
    except IntegrationError as err:
        p = err.partial
        err.trajectory = Trajectory(p.s_nodes, p.y_nodes, MODEL_1D, p.steps)
        raise
    return Trajectory(sol.s, sol.y, MODEL_1D, sol.steps)


def connect_admissible_1d(
    target: Sequence[float],
    start: Sequence[float] = (0.0, 0.0, 0.0),
    T: float = 1.0,
) -> JerkPolynomial:
    """Jerk polynomial of the admissible curve joining ``start`` to ``target``.

    ``target`` and ``start`` are ``(x, v, a)``; the curve starts at ``t = 0``
    and arrives at ``t = T``. Other durations are reduced to ``T = 1`` by
    rescaling time.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    x1, v1, a1 = (float(c) for c in target)
    x0, v0, a0 = (float(c) for c in start)
    # Normalized time tau = t / T: velocities scale by T, accelerations by T^2.
    v0n, a0n, v1n, a1n = v0 * T, a0 * T * T, v1 * T, a1 * T * T
    rhs = np.array([a1n - a0n, v1n - v0n - a0n, x1 - x0 - v0n - a0n / 2])
    e = _D_INV @ rhs
    return JerkPolynomial(e[0] / T ** 3, e[1] / T ** 4, e[2] / T ** 5)


def admissible_trajectory_1d(jp: JerkPolynomial, t, start=(0.0, 0.0, 0.0)) -> Trajectory:
    """Horizontal curve ``X1 + j X2`` sampled on the time grid ``t``."""
    t = np.asarray(t, dtype=float)
    x, v, a = jp.integrate(t, start)
    return Trajectory(t, np.column_stack([t, x, v, a]), MODEL_1D, has_covector=False)


def _positive_roots(a: float, b: float, c: float) -> list[float]:
    """Positive real roots of ``a t^2 + b t + c``, stable for tiny ``a``."""
    if abs(a) <= 1e-14 * max(abs(b), abs(c)):
        return [-c / b] if b != 0 and -c / b > 0 else []
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [q / a] + ([c / q] if q != 0 else [])
    return [r for r in roots if r > 0]


class ReparamAccel1D:
    """Time-parameterized admissible flow of a normal geodesic from the origin.

    With ``d/dt = (1/h) d/ds`` the momenta are polynomial in time,
    ``p_a(t) = p_x t^2/2 - p_v(0) t + p_a(0)``, and
    ``da/dt = p_a / sqrt(p_t^2 + p_a(0)^2 - p_a^2)`` up to the horizon where
    the radicand vanishes.
    """

    def __init__(self, p_t: float, p_v0: float, p_a0: float, p_x: float, t_max: float = T_MAX):
        if not p_t > 0:
            raise ValueError("p_t must be positive")
        self.p_t, self.p_v0, self.p_a0, self.p_x = map(float, (p_t, p_v0, p_a0, p_x))
        self.invariant = self.p_t ** 2 + self.p_a0 ** 2
        self.horizon = min(self._first_crossing(), float(t_max))

    def _first_crossing(self) -> float:
        c = math.sqrt(self.invariant)
        roots = []
        for level in (c, -c):
            # p_x/2 t^2 - p_v0 t + (p_a0 - level) = 0
            roots += _positive_roots(0.5 * self.p_x, -self.p_v0, self.p_a0 - level)
        return min(roots) if roots else math.inf

    def p_a(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * self.p_x * t * t - self.p_v0 * t + self.p_a0

    def p_v(self, t):
        return self.p_v0 - self.p_x * np.asarray(t, dtype=float)

    def h(self, t):
        self._check(t)
        return np.sqrt(np.maximum(self.invariant - self.p_a(t) ** 2, 0.0))

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError(f"t outside admissibility horizon [0, {self.horizon:.6g}]")

    def __call__(self, t):
        """Jerk ``da/dt`` at time ``t``."""
        return self.p_a(t) / self.h(t)

    def trajectory(self, t_samples, ctrl: Optional[StepControl] = None) -> Trajectory:
        """Integrate ``x' = v, v' = a, a' = jerk(t)`` from the origin in time."""
        t_samples = np.asarray(t_samples, dtype=float)
        self._check(t_samples)

        def rhs(t, y):
            return np.array([1.0, y[2], y[3], self(t)])

        span = (0.0, float(t_samples[-1]))
        sol = integrate(rhs, np.zeros(4), span, ctrl, t_samples)
        pa = self.p_a(sol.s)
        cov = np.column_stack([
            np.full(sol.s.size, self.p_t), np.full(sol.s.size, self.p_x), self.p_v(sol.s), pa,
        ])
        return Trajectory(sol.s, np.column_stack([sol.y, cov]), MODEL_1D, sol.steps)


def reparam_accel_1d(p_t: float, p_v0: float, p_a0: float, p_x: float,
                     t_max: float = T_MAX) -> ReparamAccel1D:
    return ReparamAccel1D(p_t, p_v0, p_a0, p_x, t_max)


def covector_from_jerk(jp: JerkPolynomial, p_t: float = 1.0) -> Covector1D:
    """Covector whose small-momentum geodesic has jerk close to ``jp``.

    For ``|p_a| << p_t`` the jerk is ``p_a(t) / p_t`` with ``p_a`` the
    quadratic above, so the coefficients map one to one.
    """
    return Covector1D(p_t=p_t, p_x=p_t * jp.e2, p_v=-p_t * jp.e1, p_a=p_t * jp.e0)
