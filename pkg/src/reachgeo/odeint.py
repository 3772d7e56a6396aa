"""Explicit one-step integrators with dense output.

Two schemes are available behind a single :func:`integrate` entry point:

* ``fixed``: classical 4th-order Runge-Kutta on an equidistant grid, with
  cubic Hermite interpolation between nodes.
* ``adaptive``: the Dormand-Prince 5(4) embedded pair with a PI step-size
  controller and its 4th-order continuous extension.

Callers can pass a ``guard(s, y) -> bool`` predicate. In adaptive mode a
step whose end point violates the guard is rejected and retried with a
smaller step; once the step would drop below ``min_step`` integration stops
with :class:`GuardViolation`. In fixed mode a violation stops immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]
Guard = Callable[[float, np.ndarray], bool]


class IntegrationError(RuntimeError):
    """Integration could not reach the end of the requested span.

    ``partial`` holds the solution up to the last accepted step.
    """

    def __init__(self, message: str, partial: "Solution"):
        super().__init__(message)
        self.partial = partial


class GuardViolation(IntegrationError):
    """A caller-supplied guard predicate stopped the integration."""


@dataclass(frozen=True)
class StepControl:
    """Step policy for :func:`integrate`.

    Parameters
    ----------
    mode : {"adaptive", "fixed"}
    step : float
        Nominal step for fixed mode (rounded so that it divides the span).
    abs_tol, rel_tol : float
        Mixed error tolerance for adaptive mode.
    min_step, max_step : float
        Bounds on the adaptive step.
    max_steps : int
        Hard cap on the number of attempted steps.
    """

    mode: str = "adaptive"
    step: float = 1e-2
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    min_step: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 200_000

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown step mode {self.mode!r}")
        if not (self.step > 0 and self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("step and tolerances must be positive")
        if not (0 < self.min_step <= self.max_step):
            raise ValueError("require 0 < min_step <= max_step")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @classmethod
    def fixed(cls, step: float, max_steps: int = 200_000) -> "StepControl":
        return cls(mode="fixed", step=step, max_steps=max_steps)

    @classmethod
    def adaptive(cls, tol: float = 1e-10, **kwargs) -> "StepControl":
        return cls(mode="adaptive", abs_tol=tol, rel_tol=tol, **kwargs)


# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_A = tuple(np.array(row) for row in _A)
# 5th-order weights minus embedded 4th-order weights.
_E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])
# Shampine's continuous extension coefficients.
_D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
])

_SAFE = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass
class Solution:
    """Result of :func:`integrate`.

    ``s``/``y`` hold the requested samples (or the step nodes when no samples
    were requested). The full piecewise interpolant is available through
    :meth:`dense`.
    """

    s: np.ndarray
    y: np.ndarray
    s_nodes: np.ndarray
    y_nodes: np.ndarray
    steps: np.ndarray
    n_rejected: int = 0
    _segments: list = field(default_factory=list, repr=False)
    _kind: str = "dopri"

    @property
    def s_end(self) -> float:
        return float(self.s_nodes[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.y_nodes[-1]

    def dense(self, points: Sequence[float]) -> np.ndarray:
        """Evaluate the interpolant at ``points`` (must lie within the nodes)."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        lo, hi = self.s_nodes[0], self.s_nodes[-1]
        span = hi - lo
        eps = 1e-12 * max(1.0, abs(span))
        if np.any(pts < lo - eps) or np.any(pts > hi + eps):
            raise ValueError("sample point outside integrated span")
        out = np.empty((pts.size, self.y_nodes.shape[1]))
        if len(self._segments) == 0:
            out[:] = self.y_nodes[0]
            return out
        idx = np.searchsorted(self.s_nodes, pts, side="right") - 1
        idx = np.clip(idx, 0, len(self._segments) - 1)
        for n, (i, p) in enumerate(zip(idx, pts)):
            out[n] = _eval_segment(self._kind, self._segments[i], p)
        return out


def _eval_segment(kind, seg, p):
    s0, h = seg[0], seg[1]
    th = (p - s0) / h
    if kind == "dopri":
        r1, r2, r3, r4, r5 = seg[2:]
        th1 = 1.0 - th
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
    y0, y1, f0, f1 = seg[2:]
    th2 = th * th
    th3 = th2 * th
    return ((2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * h * f0
            + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * h * f1)


def _finite(y: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(y)))


def _finish(s_nodes, y_nodes, steps, segments, kind, samples, n_rej) -> Solution:
    sol = Solution(
        s=np.asarray(s_nodes), y=np.asarray(y_nodes),
        s_nodes=np.asarray(s_nodes), y_nodes=np.asarray(y_nodes),
        steps=np.asarray(steps, dtype=float), n_rejected=n_rej,
        _segments=segments, _kind=kind,
    )
    if samples is not None:
        sol.s = np.asarray(samples, dtype=float)
        sol.y = sol.dense(sol.s)
    return sol


def _check_samples(samples, s0, s1):
    if samples is None:
        return None
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 1 or pts.size == 0:
        raise ValueError("samples must be a non-empty 1-D sequence")
    if np.any(np.diff(pts) <= 0):
        raise ValueError("samples must be strictly increasing")
    if pts[0] < s0 or pts[-1] > s1:
        raise ValueError("samples must lie inside the span")
    return pts


def integrate(
    rhs: Rhs,
    y0: Sequence[float],
    span: tuple[float, float],
    ctrl: Optional[StepControl] = None,
    samples: Optional[Sequence[float]] = None,
    guard: Optional[Guard] = None,
) -> Solution:
    """Integrate ``y' = rhs(s, y)`` over ``span``.

    Parameters
    ----------
    rhs : callable
        Right-hand side ``rhs(s, y) -> ndarray``.
    y0 : array-like, shape (n,)
        Initial value at ``span[0]``.
    span : (float, float)
        Integration interval, ``span[1] > span[0]``.
    ctrl : StepControl, optional
        Step policy; adaptive with tolerance 1e-10 by default.
    samples : array-like, optional
        Strictly increasing points inside ``span`` at which the dense output
        is evaluated. When omitted, the accepted step nodes are returned.
    guard : callable, optional
        Admissibility predicate on accepted points.

    Returns
    -------
    Solution

    Raises
    ------
    IntegrationError
        ``max_steps`` exceeded, step underflow, or a non-finite state.
    GuardViolation
        The guard could not be satisfied down to ``min_step``.
    """
    ctrl = ctrl or StepControl()
    s0, s1 = float(span[0]), float(span[1])
    if not s1 > s0:
        raise ValueError("span must be increasing")
    y = np.array(y0, dtype=float)
    if y.ndim != 1:
        raise ValueError("y0 must be one-dimensional")
    pts = _check_samples(samples, s0, s1)
    if guard is not None and not guard(s0, y):
        raise GuardViolation(
            "initial point violates guard",
            _finish([s0], [y.copy()], [], [], "dopri", None, 0),
        )
    # Overflow in a trial stage is caught by the error norm, not by numpy.
    with np.errstate(over="ignore", invalid="ignore"):
        if ctrl.mode == "fixed":
            return _integrate_rk4(rhs, y, s0, s1, ctrl, pts, guard)
        return _integrate_dopri(rhs, y, s0, s1, ctrl, pts, guard)


def _integrate_rk4(rhs, y, s0, s1, ctrl, pts, guard):
    n = max(1, int(math.ceil((s1 - s0) / ctrl.step - 1e-9)))
    if n > ctrl.max_steps:
        raise IntegrationError(
            f"fixed step needs {n} steps > max_steps={ctrl.max_steps}",
            _finish([s0], [y.copy()], [], [], "hermite", None, 0),
        )
    h = (s1 - s0) / n
    s_nodes, y_nodes, segments = [s0], [y.copy()], []
    f = np.asarray(rhs(s0, y), dtype=float)
    s = s0
    for i in range(n):
        k1 = f
        k2 = np.asarray(rhs(s + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(rhs(s + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(rhs(s + h, y + h * k3), dtype=float)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s_new = s0 + (i + 1) * h
        partial = lambda: _finish(s_nodes, y_nodes, [h] * len(segments),
                                  segments, "hermite", None, 0)
        if not _finite(y_new):
            raise IntegrationError(f"non-finite state at s={s_new:.6g}", partial())
        if guard is not None and not guard(s_new, y_new):
            raise GuardViolation(f"guard violated at s={s_new:.6g}", partial())
        f_new = np.asarray(rhs(s_new, y_new), dtype=float)
        segments.append((s, h, y, y_new, f, f_new))
        s, y, f = s_new, y_new, f_new
        s_nodes.append(s)
        y_nodes.append(y)
    return _finish(s_nodes, y_nodes, [h] * n, segments, "hermite", pts, 0)


def _initial_step(rhs, s0, y, f0, ctrl, s1):
    sc = ctrl.abs_tol + ctrl.rel_tol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, s1 - s0, ctrl.max_step)
    y1 = y + h0 * f0
    f1 = np.asarray(rhs(s0 + h0, y1), dtype=float)
    if not _finite(f1):
        return max(ctrl.min_step, 1e-3 * h0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return max(ctrl.min_step, min(100 * h0, h1, s1 - s0, ctrl.max_step))


def _integrate_dopri(rhs, y, s0, s1, ctrl, pts, guard):
    atol, rtol = ctrl.abs_tol, ctrl.rel_tol
    n_dim = y.size
    K = np.empty((7, n_dim))
    K[0] = rhs(s0, y)
    h = _initial_step(rhs, s0, y, K[0], ctrl, s1)
    s = s0
    s_nodes, y_nodes, steps, segments = [s0], [y.copy()], [], []
    facold = 1e-4
    n_rej = 0
    attempts = 0
    rejected_last = False

    def partial():
        return _finish(s_nodes, y_nodes, steps, segments, "dopri", None, n_rej)

    while s < s1:
        attempts += 1
        if attempts > ctrl.max_steps:
            raise IntegrationError(
                f"max_steps={ctrl.max_steps} exceeded at s={s:.6g}", partial())
        last = False
        if s + h >= s1 - 1e-14 * max(1.0, abs(s1)):
            h = s1 - s
            last = True
        for i in range(1, 7):
            K[i] = rhs(s + _C[i] * h, y + h * (_A[i] @ K[:i]))
        y_new = y + h * (_A[6] @ K[:6])
        # Non-finite stages propagate into the error norm and force a rejection.
        z = h * (_E @ K) / (atol + rtol * np.maximum(np.abs(y), np.abs(y_new)))
        err = math.sqrt(float(z @ z) / n_dim)
        if not math.isfinite(err):
            err = math.inf
        s_new = s1 if last else s + h
        if err <= 1.0 and guard is not None and not guard(s_new, y_new):
            # Guard violation is handled as a rejection that shrinks the step.
            n_rej += 1
            h *= 0.5
            if h < ctrl.min_step:
                raise GuardViolation(f"guard violated beyond s={s:.6g}", partial())
            rejected_last = True
            continue
        if err <= 1.0:
            fac11 = err ** _EXPO
            fac = fac11 / facold ** _BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h_new = h / fac
            facold = max(err, 1e-4)
            r2 = y_new - y
            r3 = h * K[0] - r2
            r4 = r2 - h * K[6] - r3
            r5 = h * (_D @ K)
            segments.append((s, h, y, r2, r3, r4, r5))
            steps.append(h)
            s, y = s_new, y_new
            s_nodes.append(s)
            y_nodes.append(y)
            K[0] = K[6]
            if rejected_last:
                h_new = min(h_new, h)
            rejected_last = False
            h = min(h_new, ctrl.max_step)
        else:
            n_rej += 1
            if math.isfinite(err):
                h = h / min(1.0 / _FAC_MIN, err ** _EXPO / _SAFE)
            else:
                h *= 0.25
            rejected_last = True
            if h < ctrl.min_step:
                raise IntegrationError(
                    f"step size underflow at s={s:.6g}", partial())
    return _finish(s_nodes, y_nodes, steps, segments, "dopri", pts, n_rej)
