"""Regular/singular classification of horizontal curves in the 6D model.

A horizontal curve is singular when the linear system ``Lambda' = Lambda B``,
``Lambda A = 0`` has a solution ``Lambda(s)`` that never vanishes. ``A`` and
``B`` are the coefficient matrices of the admissible variations
``V_V' = -B V_V - A V_H`` along the curve, with the frame ``(X1, X2, X3)``
horizontal and its brackets vertical.

Three curve families are supported: integral curves of ``X3``, curves
``k X2 + j X3`` and admissible curves ``X1 + k X2 + j X3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .odeint import StepControl, integrate

X3_INTEGRAL = "x3-integral"
FIBER_CURVE = "k-x2-j-x3"
ADMISSIBLE = "admissible"
FAMILIES = (X3_INTEGRAL, FIBER_CURVE, ADMISSIBLE)

RESIDUAL_TOL = 1e-8
NONVANISHING_FLOOR = 1e-6

Profile = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


class SingularFrameError(ValueError):
    """The matrices need ``1/v`` on a sample where ``v = 0``."""


def _as_function(val: Profile, s: np.ndarray) -> Callable:
    if callable(val):
        return lambda p: np.broadcast_to(np.asarray(val(p), dtype=float), np.shape(p)).copy()
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        c = float(arr)
        return lambda p: np.full(np.shape(p), c)
    if arr.shape != s.shape:
        raise ValueError(f"profile has shape {arr.shape}, grid has {s.shape}")
    return lambda p: np.interp(p, s, arr)


@dataclass(frozen=True)
class AdmissibilityMatrices:
    """``A(s)`` (3x3, vertical by horizontal) and ``B(s)`` (3x3) along a curve.

    ``a_fn`` and ``b_fn`` evaluate the matrices at any parameter array,
    returning stacks of shape ``(n, 3, 3)``; ``s`` is the sampling grid.
    """

    family: str
    s: np.ndarray
    a_fn: Callable
    b_fn: Callable

    @property
    def A(self) -> np.ndarray:
        return self.a_fn(self.s)

    @property
    def B(self) -> np.ndarray:
        return self.b_fn(self.s)


def build_matrices(family: str, s, k: Profile = 0.0, j: Profile = 0.0,
                   v: Profile = 1.0, a: Profile = 0.0) -> AdmissibilityMatrices:
    """Matrices of the admissible-variation system for a curve family.

    Parameters
    ----------
    family : {"x3-integral", "k-x2-j-x3", "admissible"}
    s : array-like
        Uniform parameter grid.
    k, j : scalar, array on ``s`` or callable
        Curvature and jerk controls of the curve.
    v, a : scalar, array on ``s`` or callable
        Speed and acceleration along the curve.

    Raises
    ------
    SingularFrameError
        ``v`` vanishes on the grid for a family whose ``B`` divides by it.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown curve family {family!r}")
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("grid needs at least two points")
    kf, jf, vf, af = (_as_function(p, s) for p in (k, j, v, a))

    if family == X3_INTEGRAL:
        def a_fn(p):
            p = np.atleast_1d(p)
            out = np.zeros((p.size, 3, 3))
            out[:, 1, 0] = 1.0
            return out

        def b_fn(p):
            return np.zeros((np.atleast_1d(p).size, 3, 3))

        return AdmissibilityMatrices(family, s, a_fn, b_fn)

    if np.any(vf(s) == 0.0):
        raise SingularFrameError(f"v vanishes on the grid; {family} matrices divide by v")

    def a_fn(p):
        p = np.atleast_1d(p)
        out = np.zeros((p.size, 3, 3))
        out[:, 0, 0] = -kf(p)
        out[:, 1, 0] = jf(p)
        if family == ADMISSIBLE:
            out[:, 0, 1] = 1.0
            out[:, 1, 2] = 1.0
        return out

    def b_fn(p):
        p = np.atleast_1d(p)
        kk, vv = kf(p), vf(p)
        out = np.zeros((p.size, 3, 3))
        out[:, 0, 2] = -kk / vv
        out[:, 2, 0] = kk * vv
        if family == ADMISSIBLE:
            out[:, 0, 0] = af(p) / vv
            out[:, 2, 1] = -1.0
        return out

    return AdmissibilityMatrices(family, s, a_fn, b_fn)


@dataclass(frozen=True)
class Classification:
    """Verdict of :func:`classify`.

    ``witness`` holds ``Lambda`` on the grid for a singular curve. For a
    regular curve it is the grid solution of the constrained system, which
    is identically zero; ``max_norm`` reports its size.
    """

    singular: bool
    witness: np.ndarray
    residual: float
    min_norm: float
    max_norm: float

    @property
    def verdict(self) -> str:
        return "singular" if self.singular else "regular"


def _left_null(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Rows spanning ``{l : l m = 0}``."""
    u, sv, _ = np.linalg.svd(m)
    scale = max(1.0, sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol * scale))
    return u[:, rank:].T


def _check_uniform(s: np.ndarray):
    d = np.diff(s)
    if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(1.0, abs(s[-1] - s[0])):
        raise ValueError("classification needs a uniform increasing grid")


def classify(m: AdmissibilityMatrices, ctrl: Optional[StepControl] = None,
             residual_tol: float = RESIDUAL_TOL,
             floor: float = NONVANISHING_FLOOR) -> Classification:
    """Search for a nonvanishing ``Lambda`` with ``Lambda' = Lambda B``, ``Lambda A = 0``.

    The kernel of ``Lambda -> Lambda A(s0)`` is propagated through
    ``Lambda' = Lambda B``; the combinations annihilating ``A`` on every grid
    point form the candidate witnesses. A witness is accepted when its
    constraint residual is at most ``residual_tol`` and its norm stays above
    ``floor`` over the grid.
    """
    s = m.s
    _check_uniform(s)
    A = m.A
    basis = _left_null(A[0])
    n = s.size
    if basis.shape[0] == 0:
        zero = np.zeros((n, 3))
        return Classification(False, zero, 0.0, 0.0, 0.0)
    r = basis.shape[0]
    ctrl = ctrl or StepControl.adaptive(1e-12)

    def rhs(p, y):
        lam = y.reshape(r, 3)
        return (lam @ m.b_fn(p)[0]).ravel()

    sol = integrate(rhs, basis.ravel(), (s[0], s[-1]), ctrl, s)
    phi = sol.y.reshape(n, r, 3)
    # Constraint rows: (phi_i A_i)^T c = 0 for every grid point i.
    cons = np.einsum("nrk,nkj->njr", phi, A).reshape(3 * n, r)
    _, sv, vt = np.linalg.svd(cons)
    sv = np.concatenate([sv, np.zeros(r - sv.size)])
    best = None
    for idx in np.argsort(sv):
        c = vt[idx]
        lam = np.einsum("r,nrk->nk", c, phi)
        res = float(np.max(np.abs(np.einsum("nk,nkj->nj", lam, A))))
        norms = np.linalg.norm(lam, axis=1)
        cand = (res, float(norms.min()), float(norms.max()), lam)
        if res <= residual_tol and cand[1] >= floor:
            return Classification(True, lam, res, cand[1], cand[2])
        if best is None or res < best[0]:
            best = cand
    # No witness: the constrained grid solution is the zero combination.
    null = vt[sv <= residual_tol]
    if null.shape[0] == 0:
        zero = np.zeros((n, 3))
        return Classification(False, zero, best[0], 0.0, 0.0)
    lam = np.einsum("r,nrk->nk", null[0], phi)
    norms = np.linalg.norm(lam, axis=1)
    return Classification(False, lam, best[0], float(norms.min()), float(norms.max()))


def holonomy_map(m: AdmissibilityMatrices, v_h: Callable,
                 ctrl: Optional[StepControl] = None) -> np.ndarray:
    """Vertical endpoint ``V_V(s1)`` of ``V_V' = -B V_V - A V_H`` from ``V_V(s0) = 0``.

    ``v_h(s)`` returns the horizontal components ``(v_H1, v_H2, v_H3)``.
    """
    ctrl = ctrl or StepControl.adaptive(1e-12)
    s = m.s

    def rhs(p, y):
        a = m.a_fn(p)[0]
        b = m.b_fn(p)[0]
        return -b @ y - a @ np.asarray(v_h(p), dtype=float)

    return integrate(rhs, np.zeros(3), (s[0], s[-1]), ctrl).y_end
