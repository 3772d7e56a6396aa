"""Shared types, horizontal frames and curve functionals for both models.

Coordinate order used throughout the package:

* 1D (2-jet space): ``(t, x, v, a)`` and covector ``(p_t, p_x, p_v, p_a)``.
* 2D: ``(t, x, y, theta, v, a)`` and covector
  ``(p_t, p_x, p_y, p_theta, p_v, p_a)``.

A cotangent point is stored as the concatenation ``state + covector``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

STATE_1D = ("t", "x", "v", "a")
COVECTOR_1D = ("p_t", "p_x", "p_v", "p_a")
STATE_2D = ("t", "x", "y", "theta", "v", "a")
COVECTOR_2D = ("p_t", "p_x", "p_y", "p_theta", "p_v", "p_a")

MODEL_1D = "1d"
MODEL_2D = "2d"


class DimensionError(ValueError):
    """Sampled arrays do not share a common grid."""


def wrap_angle(theta):
    """Wrap an angle (or array of angles) to ``(-pi, pi]``."""
    w = np.mod(np.asarray(theta, dtype=float) + math.pi, 2 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


class _Vec:
    """Mixin for small frozen records that round-trip through arrays."""

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            if not math.isfinite(val):
                raise ValueError(f"{type(self).__name__}.{f.name} must be finite")
            object.__setattr__(self, f.name, val)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float).ravel()
        names = [f.name for f in fields(cls)]
        if arr.size != len(names):
            raise DimensionError(f"{cls.__name__} needs {len(names)} values, got {arr.size}")
        return cls(**dict(zip(names, arr)))


@dataclass(frozen=True)
class State1D(_Vec):
    t: float = 0.0
    x: float = 0.0
    v: float = 0.0
    a: float = 0.0


@dataclass(frozen=True)
class Covector1D(_Vec):
    p_t: float = 0.0
    p_x: float = 0.0
    p_v: float = 0.0
    p_a: float = 0.0


@dataclass(frozen=True)
class State2D(_Vec):
    """Point of the 6D feature space; ``theta`` is wrapped to (-pi, pi]."""

    t: float = 0.0
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Covector2D(_Vec):
    p_t: float = 0.0
    p_x: float = 0.0
    p_y: float = 0.0
    p_theta: float = 0.0
    p_v: float = 0.0
    p_a: float = 0.0


@dataclass(frozen=True)
class HorizontalControls:
    """Coefficients of a curve's tangent in the horizontal frame.

    ``param`` is the parameter grid the coefficients are sampled on. For the
    1D model the frame is ``(X1, X2)`` and ``k`` is ``None``; for the 2D
    model it is ``(X1, X2, X3)`` with coefficients ``(alpha1, k, j)``.
    Admissible curves have ``alpha1 == 1`` and are parameterized by time.
    """

    param: np.ndarray
    alpha1: np.ndarray
    j: np.ndarray
    k: Optional[np.ndarray] = None

    def __post_init__(self):
        n = np.size(self.param)
        for name in ("param", "alpha1", "j", "k"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.asarray(val, dtype=float)
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            if arr.shape != (n,):
                raise DimensionError(f"controls.{name} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def is_admissible(self) -> bool:
        return bool(np.allclose(self.alpha1, 1.0, rtol=0, atol=1e-12))

    def speed_squared(self) -> np.ndarray:
        sq = self.alpha1 ** 2 + self.j ** 2
        if self.k is not None:
            sq = sq + self.k ** 2
        return sq


@dataclass(frozen=True)
class Trajectory:
    """Sampled curve on the cotangent bundle.

    ``s`` is the curve parameter, ``y`` has one row per sample holding the
    state followed by the covector (``covector`` columns are absent when the
    trajectory is a plain horizontal curve). ``steps`` records the accepted
    integrator steps.
    """

    s: np.ndarray
    y: np.ndarray
    model: str
    steps: np.ndarray = np.empty(0)
    has_covector: bool = True

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        y = np.array(self.y, dtype=float)
        if s.ndim != 1 or y.ndim != 2 or y.shape[0] != s.size:
            raise DimensionError("trajectory samples and states disagree")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            raise ValueError("trajectory parameter must be strictly increasing")
        if self.model not in (MODEL_1D, MODEL_2D):
            raise ValueError(f"unknown model {self.model!r}")
        want = len(self.columns)
        if y.shape[1] != want:
            raise DimensionError(f"{self.model} trajectory needs {want} columns, got {y.shape[1]}")
        for arr in (s, y):
            arr.setflags(write=False)
        steps = np.array(self.steps, dtype=float)
        steps.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "steps", steps)

    @property
    def columns(self) -> tuple[str, ...]:
        st, co = (STATE_1D, COVECTOR_1D) if self.model == MODEL_1D else (STATE_2D, COVECTOR_2D)
        return st + co if self.has_covector else st

    def __len__(self) -> int:
        return self.s.size

    def col(self, name: str) -> np.ndarray:
        """Column by coordinate name; ``theta`` is returned unwrapped."""
        return self.y[:, self.columns.index(name)]

    def state(self, i: int):
        n = len(STATE_1D) if self.model == MODEL_1D else len(STATE_2D)
        cls = State1D if self.model == MODEL_1D else State2D
        return cls.from_array(self.y[i, :n])

    def covector(self, i: int):
        if not self.has_covector:
            return None
        n = len(STATE_1D) if self.model == MODEL_1D else len(STATE_2D)
        cls = Covector1D if self.model == MODEL_1D else Covector2D
        return cls.from_array(self.y[i, n:])


def eval_fields_1d(s: State1D) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal frame ``(X1, X2)`` of the 2-jet space at ``s``."""
    x1 = np.array([1.0, s.v, s.a, 0.0])
    x2 = np.array([0.0, 0.0, 0.0, 1.0])
    return x1, x2


def eval_fields_2d(s: State2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Horizontal frame ``(X1, X2, X3)`` of the 6D feature space at ``s``."""
    c, sn = math.cos(s.theta), math.sin(s.theta)
    x1 = np.array([1.0, s.v * c, s.v * sn, 0.0, s.a, 0.0])
    x2 = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    x3 = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    return x1, x2, x3


def _check_grid(traj: Trajectory, controls: HorizontalControls):
    if controls.param.size != len(traj):
        raise DimensionError(
            f"controls sampled on {controls.param.size} points, trajectory has {len(traj)}")
    if (controls.k is None) != (traj.model == MODEL_1D):
        raise DimensionError("control layout does not match trajectory model")


def curve_length(traj: Trajectory, controls: HorizontalControls) -> float:
    """Sub-Riemannian length: trapezoid rule for the integral of the frame norm.

    For admissible controls this is ``int sqrt(1 + j^2) dt`` (1D) or
    ``int sqrt(1 + k^2 + j^2) dt`` (2D).
    """
    _check_grid(traj, controls)
    return float(np.trapezoid(np.sqrt(controls.speed_squared()), controls.param))


def curve_energy(traj: Trajectory, controls: HorizontalControls) -> float:
    """Energy ``1/2 int |gamma'|^2`` with the same quadrature as :func:`curve_length`."""
    _check_grid(traj, controls)
    return float(0.5 * np.trapezoid(controls.speed_squared(), controls.param))


def horizontal_speed_factor(traj: Trajectory) -> np.ndarray:
    """Coefficient of ``X1`` along a normal-flow trajectory (``h`` or ``psi``)."""
    if not traj.has_covector:
        raise ValueError("trajectory carries no covector")
    v, a = traj.col("v"), traj.col("a")
    if traj.model == MODEL_1D:
        return v * traj.col("p_x") + a * traj.col("p_v") + traj.col("p_t")
    th = traj.col("theta")
    return (v * (np.cos(th) * traj.col("p_x") + np.sin(th) * traj.col("p_y"))
            + a * traj.col("p_v") + traj.col("p_t"))


def native_controls(traj: Trajectory) -> HorizontalControls:
    """Frame coefficients of a normal geodesic in its own parameter ``s``."""
    h = horizontal_speed_factor(traj)
    if traj.model == MODEL_1D:
        return HorizontalControls(param=traj.s, alpha1=h, j=traj.col("p_a"))
    return HorizontalControls(param=traj.s, alpha1=h, j=traj.col("p_a"), k=traj.col("p_theta"))


def admissible_controls(traj: Trajectory) -> HorizontalControls:
    """Time-parameterized controls ``(1, j)`` / ``(1, k, j)`` of an admissible flow.

    Requires the ``X1`` coefficient to stay positive; the returned grid is the
    trajectory's time column.
    """
    h = horizontal_speed_factor(traj)
    if np.any(h <= 0):
        raise ValueError("trajectory is not admissible: X1 coefficient vanishes")
    ones = np.ones(len(traj))
    j = traj.col("p_a") / h
    if traj.model == MODEL_1D:
        return HorizontalControls(param=traj.col("t"), alpha1=ones, j=j)
    return HorizontalControls(param=traj.col("t"), alpha1=ones, j=j, k=traj.col("p_theta") / h)


def unit_span_controls(traj: Trajectory) -> HorizontalControls:
    """Native controls after affine rescaling of the parameter to ``[0, 1]``.

    A normal geodesic has constant speed in its native parameter, so this is
    the constant-speed parameterization on the unit interval.
    """
    c = native_controls(traj)
    span = traj.s[-1] - traj.s[0]
    param = (traj.s - traj.s[0]) / span
    k = None if c.k is None else c.k * span
    return HorizontalControls(param=param, alpha1=c.alpha1 * span, j=c.j * span, k=k)
