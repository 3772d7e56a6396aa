"""Minimal admissible geodesics between a point and a fiber set, or two fiber sets.

A fiber set fixes ``(t, x, y, v)`` and lets the heading and the acceleration
range over intervals. Distances are computed by exhaustive grid search: every
grid point is solved by shooting and the shortest converged geodesic wins.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geomcore import State2D, Trajectory, curve_length, native_controls
from .shooting import (
    MODEL_2D, MODEL_2D_FROZEN, BoundarySpec, Fixed, Free, Interval, NonConvergenceError,
    ShootingOptions, ShootingResult, SpecError, solve,
)

DEFAULT_GRID = 16
THREADS_ENV = "REACHGEO_THREADS"


class NoGeodesicError(RuntimeError):
    """No grid point of a fiber scan converged; ``scan`` holds the diagnostics."""

    def __init__(self, message: str, scan: "ScanResult"):
        super().__init__(message)
        self.scan = scan


class ScanWarning(UserWarning):
    pass


def _range(r) -> tuple[float, float]:
    if np.isscalar(r):
        return float(r), float(r)
    lo, hi = r
    return float(lo), float(hi)


@dataclass(frozen=True)
class FiberSet:
    """Points ``(t, x, y, theta, v, a)`` with ``(t, x, y, v)`` fixed.

    ``theta_range`` and ``accel_range`` are ``(lo, hi)`` pairs or scalars;
    ``counts`` are the grid sizes for the heading and acceleration.
    """

    base: tuple[float, float, float, float]
    theta_range: tuple[float, float]
    accel_range: tuple[float, float]
    counts: tuple[int, int] = (DEFAULT_GRID, DEFAULT_GRID)

    def __post_init__(self):
        base = tuple(float(b) for b in self.base)
        if len(base) != 4:
            raise ValueError("base needs (t, x, y, v)")
        th, ac = _range(self.theta_range), _range(self.accel_range)
        for name, (lo, hi) in (("theta", th), ("accel", ac)):
            if not lo <= hi:
                raise ValueError(f"{name} range is empty")
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 2 or min(counts) < 1:
            raise ValueError("grid counts must be >= 1")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "theta_range", th)
        object.__setattr__(self, "accel_range", ac)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def point(cls, s: State2D) -> "FiberSet":
        return cls((s.t, s.x, s.y, s.v), s.theta, s.a, (1, 1))

    def conditions(self) -> dict:
        t, x, y, v = self.base
        return {"t": t, "x": x, "y": y, "v": v,
                "theta": self.theta_range, "a": self.accel_range}

    def grid_counts(self) -> dict:
        return {"theta": self.counts[0], "a": self.counts[1]}


@dataclass(frozen=True)
class GridPoint:
    index: tuple[int, ...]
    values: dict
    result: Optional[ShootingResult]
    length: float
    error: str = ""

    @property
    def converged(self) -> bool:
        return self.result is not None and self.result.converged


@dataclass(frozen=True)
class ScanResult:
    """All grid points of a fiber scan and the selected minimizer."""

    axes: tuple[str, ...]
    points: tuple[GridPoint, ...]
    best: Optional[GridPoint] = field(default=None)

    @property
    def converged_fraction(self) -> float:
        if not self.points:
            return 0.0
        return sum(p.converged for p in self.points) / len(self.points)

    @property
    def failures(self) -> list[GridPoint]:
        return [p for p in self.points if not p.converged]

    @property
    def length(self) -> float:
        return self.best.length if self.best else math.inf


def geodesic_length(traj: Trajectory) -> float:
    """Sub-Riemannian length of a normal geodesic from its native controls."""
    return curve_length(traj, native_controls(traj))


def grid_values(lo: float, hi: float, n: int) -> np.ndarray:
    if lo == hi or n == 1:
        return np.array([lo]) if lo == hi else np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


def _axes(spec: BoundarySpec, counts: dict):
    """Interval coordinates as ``(side, position, name, values)``."""
    out = []
    for side, conds in (("initial", spec.initial), ("final", spec.final)):
        for i, (name, c) in enumerate(zip(spec.names, conds)):
            if isinstance(c, Interval):
                n = counts.get((side, name), counts.get(name, DEFAULT_GRID))
                out.append((side, i, name, grid_values(c.lo, c.hi, n)))
    return out


def _instantiate(spec: BoundarySpec, axes, idx) -> tuple[BoundarySpec, dict]:
    initial, final = list(spec.initial), list(spec.final)
    values = {}
    for (side, i, name, vals), k in zip(axes, idx):
        target = initial if side == "initial" else final
        target[i] = Fixed(vals[k])
        values[f"{name}{0 if side == 'initial' else 1}"] = float(vals[k])
    return BoundarySpec(spec.model, tuple(initial), tuple(final)), values


def _solve_row(args):
    """Solve one row of the grid, seeding each point with its converged neighbour."""
    spec, axes, row, opts, seed = args
    out = []
    prev = None
    for idx in row:
        sub, values = _instantiate(spec, axes, idx)
        starts = []
        if seed is not None:
            if prev is not None:
                # Linear predictor from the two previous solutions.
                starts.append(2.0 * seed - prev)
            starts.append(seed)
        try:
            res = solve(sub, opts, starts or None)
        except NonConvergenceError as err:
            out.append(GridPoint(idx, values, err.best, math.inf, str(err)))
            continue
        if not res.converged:
            out.append(GridPoint(idx, values, res, math.inf, "trajectory failed to re-integrate"))
            continue
        prev, seed = seed, res.beta0
        out.append(GridPoint(idx, values, res, geodesic_length(res.trajectory)))
    return out


def _seed(point: GridPoint):
    return point.result.beta0 if point.converged else None


def thread_cap() -> int:
    """Worker count from ``REACHGEO_THREADS`` (default 1: sequential)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def scan(spec: BoundarySpec, opts: Optional[ShootingOptions] = None,
         counts: Optional[dict] = None, threads: Optional[int] = None) -> ScanResult:
    """Solve every grid point of the interval conditions in ``spec``.

    ``counts`` maps a coordinate name (or ``(side, name)``) to its grid size.
    Each grid point is seeded with the solution of its predecessor along the
    last axis; the first point of each row with that of the previous row.
    Rows then run independently, in a process pool of ``threads`` workers
    when requested, so the result does not depend on the worker count.

    Raises
    ------
    NoGeodesicError
        No grid point converged.
    """
    opts = opts or ShootingOptions()
    problems = spec.issues()
    if problems:
        raise SpecError("; ".join(problems))
    axes = _axes(spec, counts or {})
    shape = [len(a[3]) for a in axes]
    if not axes:
        rows = [[()]]
    else:
        lead = itertools.product(*(range(n) for n in shape[:-1]))
        rows = [[tuple(head) + (k,) for k in range(shape[-1])] for head in lead]
    # The first point of every row is solved in one seeded sequential pass,
    # then rows run independently from those seeds.
    heads = _solve_row((spec, axes, [row[0] for row in rows], opts, None))
    jobs = [(spec, axes, row[1:], opts, _seed(head)) for row, head in zip(rows, heads)]
    threads = thread_cap() if threads is None else max(1, int(threads))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            tails = list(pool.map(_solve_row, jobs))
    else:
        tails = [_solve_row(j) for j in jobs]
    points = tuple(p for head, tail in zip(heads, tails) for p in [head] + tail)
    ok = [p for p in points if p.converged]
    best = min(ok, key=lambda p: (p.length, p.index)) if ok else None
    result = ScanResult(tuple(a[2] + ("0" if a[0] == "initial" else "1") for a in axes),
                        points, best)
    if best is None:
        raise NoGeodesicError(f"none of {len(points)} grid points converged", result)
    n_fail = len(points) - len(ok)
    if n_fail:
        warnings.warn(f"{n_fail} of {len(points)} grid points did not converge", ScanWarning,
                      stacklevel=2)
    return result


def _fiber_conditions(F: FiberSet, frozen_end: bool) -> dict:
    cond = F.conditions()
    if frozen_end:
        cond["theta"] = None
    return cond


def _counts(F0: Optional[FiberSet], F1: Optional[FiberSet]) -> dict:
    out = {}
    for side, F in (("initial", F0), ("final", F1)):
        if F is not None:
            for name, n in F.grid_counts().items():
                out[(side, name)] = n
    return out


def distance_point_to_set(eta: State2D, F: FiberSet, opts: Optional[ShootingOptions] = None,
                          reverse: bool = False, model: str = MODEL_2D,
                          threads: Optional[int] = None) -> ScanResult:
    """Shortest geodesic from the point ``eta`` to the fiber set ``F``.

    With ``reverse=True`` the geodesic runs from ``F`` to ``eta``. With the
    heading-frozen model the final heading is left free.
    """
    point = {"t": eta.t, "x": eta.x, "y": eta.y, "theta": eta.theta, "v": eta.v, "a": eta.a}
    frozen = model == MODEL_2D_FROZEN
    if reverse:
        initial = _fiber_conditions(F, False)
        final = dict(point)
        counts = _counts(F, None)
    else:
        initial = point
        final = _fiber_conditions(F, frozen)
        counts = _counts(None, F)
    if frozen:
        final["theta"] = None
    spec = BoundarySpec.from_values(model, initial, final)
    return scan(spec, opts, counts, threads)


def distance_set_to_set(F0: FiberSet, F1: FiberSet, opts: Optional[ShootingOptions] = None,
                        model: str = MODEL_2D, threads: Optional[int] = None) -> ScanResult:
    """Shortest geodesic between two fiber sets over the product grid."""
    frozen = model == MODEL_2D_FROZEN
    spec = BoundarySpec.from_values(model, _fiber_conditions(F0, False),
                                    _fiber_conditions(F1, frozen))
    return scan(spec, opts, _counts(F0, F1), threads)
