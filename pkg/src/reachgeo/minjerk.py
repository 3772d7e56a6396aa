"""Closed-form minimum-jerk reach (fifth-order polynomial in normalized time).

Used as an independent reference for the geodesic models: straight path,
zero velocity and acceleration at both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Position profile 10 tau^3 - 15 tau^4 + 6 tau^5, monomial basis in tau.
_POS = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
_VEL = np.polynomial.polynomial.polyder(_POS, 1)
_ACC = np.polynomial.polynomial.polyder(_POS, 2)
_JERK = np.polynomial.polynomial.polyder(_POS, 3)

# int_0^1 (d^3/dtau^3 profile)^2 dtau, exact.
_JERK_SQ_INTEGRAL = 720.0


@dataclass(frozen=True)
class QuinticReach:
    """Point-to-point reach from ``(x0, y0)`` to ``(xT, yT)`` in time ``T``."""

    x0: float
    y0: float
    xT: float
    yT: float
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("duration T must be positive")

    @property
    def displacement(self) -> np.ndarray:
        return np.array([self.xT - self.x0, self.yT - self.y0])


def _tau(r: QuinticReach, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > r.T):
        raise ValueError(f"time outside [0, {r.T}]")
    return t / r.T


def quintic_position(r: QuinticReach, t):
    """Hand position at time ``t``; returns ``(x, y)`` (scalars or arrays)."""
    s = np.polynomial.polynomial.polyval(_tau(r, t), _POS)
    d = r.displacement
    return r.x0 + d[0] * s, r.y0 + d[1] * s


def quintic_derivatives(r: QuinticReach, t):
    """Velocity, acceleration and jerk vectors at ``t``.

    Each entry is an array of shape ``(2,)`` for scalar ``t`` or ``(2, n)``.
    """
    tau = _tau(r, t)
    d = r.displacement.reshape(2, *([1] * np.ndim(tau)))
    out = []
    for n, coef in enumerate((_VEL, _ACC, _JERK), start=1):
        out.append(d * np.polynomial.polynomial.polyval(tau, coef) / r.T ** n)
    return tuple(out)


def minjerk_cost(r: QuinticReach) -> float:
    """Half the integral of squared jerk, ``360 |D|^2 / T^5`` in closed form."""
    d2 = float(r.displacement @ r.displacement)
    return 0.5 * _JERK_SQ_INTEGRAL * d2 / r.T ** 5


def jerk_cost_quadrature(jerk, T: float, n: int = 64) -> float:
    """Gauss-Legendre estimate of ``1/2 int_0^T |jerk(t)|^2 dt`` for a callable."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    t = 0.5 * T * (nodes + 1.0)
    vals = np.asarray([np.sum(np.square(jerk(ti))) for ti in t])
    return 0.5 * 0.5 * T * float(weights @ vals)


def peak_speed(r: QuinticReach) -> float:
    """Speed at mid-reach, ``15/8 |D| / T``."""
    return 1.875 * math.hypot(*r.displacement) / r.T
