"""Shooting method for the geodesic two-point boundary-value problems.

The unknown is the initial covector. A candidate covector is flowed over
``s in [0, 1]`` and the mismatch between the reached state and the fixed
final coordinates is driven to zero by a damped Gauss-Newton iteration with a
finite-difference Jacobian.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import engel1d, kin2d
from .geomcore import (
    COVECTOR_1D, COVECTOR_2D, MODEL_1D, MODEL_2D, STATE_1D, STATE_2D, Covector1D, Covector2D,
    State1D, State2D, Trajectory, wrap_angle,
)
from .odeint import IntegrationError, StepControl

MODEL_2D_FROZEN = "2d-theta-frozen"
MODELS = (MODEL_1D, MODEL_2D, MODEL_2D_FROZEN)
FIBER_COORDS = ("theta", "a")


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Free:
    pass


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")


Condition = Union[Fixed, Free, Interval]


class SpecError(ValueError):
    """Boundary specification violates a structural rule."""


def state_names(model: str) -> tuple[str, ...]:
    return STATE_1D if model == MODEL_1D else STATE_2D


def covector_names(model: str) -> tuple[str, ...]:
    if model == MODEL_1D:
        return COVECTOR_1D
    if model == MODEL_2D_FROZEN:
        return tuple(c for c in COVECTOR_2D if c != "p_theta")
    return COVECTOR_2D


@dataclass(frozen=True)
class BoundarySpec:
    """End conditions per state coordinate.

    ``initial`` and ``final`` map every state coordinate of the model to a
    :class:`Fixed`, :class:`Free` or :class:`Interval` condition. Intervals
    describe fiber sets and must be expanded (see ``setgeo``) before solving.
    """

    model: str
    initial: tuple[Condition, ...]
    final: tuple[Condition, ...]

    def __post_init__(self):
        if self.model not in MODELS:
            raise SpecError(f"unknown model {self.model!r}")
        n = len(state_names(self.model))
        if len(self.initial) != n or len(self.final) != n:
            raise SpecError(f"{self.model} needs {n} conditions per end point")
        object.__setattr__(self, "initial", tuple(self.initial))
        object.__setattr__(self, "final", tuple(self.final))

    @classmethod
    def from_values(cls, model: str, initial: dict, final: dict) -> "BoundarySpec":
        """Build from ``{name: value | (lo, hi) | None}`` maps; missing means Free."""
        names = state_names(model)
        for d in (initial, final):
            unknown = set(d) - set(names)
            if unknown:
                raise SpecError(f"unknown coordinates {sorted(unknown)} for model {model}")
        return cls(model, tuple(_cond(initial.get(n)) for n in names),
                   tuple(_cond(final.get(n)) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return state_names(self.model)

    @property
    def unknowns(self) -> tuple[str, ...]:
        return covector_names(self.model)

    @property
    def fixed_final(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.final) if isinstance(c, Fixed))

    def issues(self) -> list[str]:
        """Structural problems; an empty list means the spec can be solved."""
        out = []
        for side, conds in (("initial", self.initial), ("final", self.final)):
            for name, c in zip(self.names, conds):
                if isinstance(c, Interval) and name not in FIBER_COORDS:
                    out.append(f"{side} {name}: intervals allowed only on theta/accel")
        for name, c in zip(self.names, self.initial):
            if isinstance(c, Free):
                out.append(f"initial {name}: initial state must be fixed")
        n_eq = sum(not isinstance(c, Free) for c in self.final)
        if self.model == MODEL_2D_FROZEN and not isinstance(self.final[3], Free):
            n_eq -= 1
            out.append("final theta: must be free when heading is frozen")
        if n_eq != len(self.unknowns):
            out.append(f"non-square system: {n_eq} final conditions for "
                       f"{len(self.unknowns)} covector unknowns")
        return out

    def has_intervals(self) -> bool:
        return any(isinstance(c, Interval) for c in self.initial + self.final)

    def check(self):
        problems = self.issues()
        if problems:
            raise SpecError("; ".join(problems))
        if self.has_intervals():
            raise SpecError("interval conditions must be expanded before solving")

    def initial_state(self) -> np.ndarray:
        return np.array([c.value for c in self.initial])

    def target(self) -> np.ndarray:
        return np.array([self.final[i].value for i in self.fixed_final])


def _cond(v) -> Condition:
    if v is None:
        return Free()
    if isinstance(v, (Fixed, Free, Interval)):
        return v
    if isinstance(v, (tuple, list)):
        lo, hi = v
        return Fixed(lo) if lo == hi else Interval(lo, hi)
    return Fixed(v)


@dataclass(frozen=True)
class ShootingOptions:
    """Solver settings.

    ``delta`` scales the multi-start lattice; ``small`` is its middle value.
    ``max_starts`` caps lattice candidates tried after prescreening.
    """

    tol: float = 1e-8
    max_iter: int = 200
    max_halvings: int = 20
    fd_step: float = 1e-6
    delta: float = 0.5
    small: float = 0.05
    max_starts: int = 8
    warm_start: bool = True
    continuation: bool = True
    require_admissible: bool = True
    ctrl: StepControl = field(default_factory=lambda: StepControl.adaptive(1e-10))
    samples: int = 101


@dataclass(frozen=True)
class ShootingResult:
    beta0: np.ndarray
    residual_norm: float
    iterations: int
    trajectory: Optional[Trajectory]
    converged: bool
    trace: tuple = ()
    start_index: int = -1


class NonConvergenceError(RuntimeError):
    """No start converged; ``best`` is the lowest-residual attempt."""

    def __init__(self, message: str, best: Optional[ShootingResult], attempts: Sequence = ()):
        super().__init__(message)
        self.best = best
        self.attempts = tuple(attempts)


def _full_covector(spec: BoundarySpec, beta: np.ndarray) -> np.ndarray:
    if spec.model == MODEL_2D_FROZEN:
        return np.insert(beta, 3, 0.0)
    return beta


def _flow(spec: BoundarySpec, beta, opts: ShootingOptions, samples=None) -> Trajectory:
    y0 = spec.initial_state()
    p = _full_covector(spec, np.asarray(beta, dtype=float))
    if spec.model == MODEL_1D:
        hs = engel1d.HamState1D(State1D.from_array(y0), Covector1D.from_array(p))
        return engel1d.flow_1d(hs, (0.0, 1.0), opts.ctrl, samples, opts.require_admissible)
    hs = kin2d.HamState2D(State2D.from_array(y0), Covector2D.from_array(p))
    return kin2d.flow_2d(hs, (0.0, 1.0), opts.ctrl, samples, opts.require_admissible,
                         freeze_theta=spec.model == MODEL_2D_FROZEN)


def _mismatch(spec: BoundarySpec, end: np.ndarray) -> np.ndarray:
    idx = spec.fixed_final
    g = end[list(idx)] - spec.target()
    if spec.model != MODEL_1D:
        for k, i in enumerate(idx):
            if i == 3:
                g[k] = wrap_angle(g[k])
    return g


def residual(beta0, spec: BoundarySpec, opts: Optional[ShootingOptions] = None) -> np.ndarray:
    """Fixed final coordinates reached from ``beta0`` minus their targets (theta wrapped).

    Raises
    ------
    IntegrationError
        The flow failed; ``err.beta0`` holds the guess.
    """
    opts = opts or ShootingOptions()
    spec.check()
    return _residual(beta0, spec, opts)


def _residual(beta0, spec, opts) -> np.ndarray:
    try:
        traj = _flow(spec, beta0, opts, samples=[0.0, 1.0])
    except IntegrationError as err:
        err.beta0 = np.array(beta0, dtype=float)
        raise
    return _mismatch(spec, traj.y[-1])


def fd_jacobian(beta, spec: BoundarySpec, opts: ShootingOptions, g0=None) -> np.ndarray:
    """Forward differences with step ``fd_step * max(|beta_i|, 1)``; backward on failure."""
    beta = np.asarray(beta, dtype=float)
    if g0 is None:
        g0 = _residual(beta, spec, opts)
    jac = np.empty((g0.size, beta.size))
    for i in range(beta.size):
        h = opts.fd_step * max(abs(beta[i]), 1.0)
        e = np.zeros_like(beta)
        e[i] = h
        try:
            jac[:, i] = (_residual(beta + e, spec, opts) - g0) / h
        except IntegrationError:
            jac[:, i] = (g0 - _residual(beta - e, spec, opts)) / h
    return jac


def _newton(beta, spec, opts, start_index) -> ShootingResult:
    beta = np.array(beta, dtype=float)
    trace = []
    try:
        g = _residual(beta, spec, opts)
    except IntegrationError:
        return ShootingResult(beta, math.inf, 0, None, False, (), start_index)
    norm = float(np.linalg.norm(g))
    it = 0
    while norm > opts.tol and it < opts.max_iter:
        it += 1
        try:
            jac = fd_jacobian(beta, spec, opts, g)
        except IntegrationError:
            break
        step, *_ = np.linalg.lstsq(jac, -g, rcond=None)
        lam = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            trial = beta + lam * step
            try:
                g_new = _residual(trial, spec, opts)
            except IntegrationError:
                lam *= 0.5
                continue
            n_new = float(np.linalg.norm(g_new))
            if n_new < norm:
                beta, g, norm, accepted = trial, g_new, n_new, True
                break
            lam *= 0.5
        trace.append((it, norm, lam if accepted else 0.0))
        if not accepted:
            break
    return ShootingResult(beta, norm, it, None, norm <= opts.tol, tuple(trace), start_index)


def warm_start(spec: BoundarySpec, p_t: float = 1.0) -> Optional[np.ndarray]:
    """Covector of the linearized geodesic matching the admissible connection curve.

    Returns ``None`` when the end conditions do not fix enough coordinates
    to build the connection.
    """
    st = dict(zip(spec.names, spec.initial_state()))
    fin = {n: c.value for n, c in zip(spec.names, spec.final) if isinstance(c, Fixed)}
    if spec.model == MODEL_1D:
        if not all(n in fin for n in ("x", "v", "a")):
            return None
        jp = engel1d.connect_admissible_1d((fin["x"], fin["v"], fin["a"]),
                                           (st["x"], st["v"], st["a"]))
        return engel1d.covector_from_jerk(jp, p_t).as_array()
    if not all(n in fin for n in ("x", "y", "v", "a")):
        return None
    th0 = st["theta"]
    if spec.model == MODEL_2D_FROZEN or "theta" not in fin:
        k = 0.0
    else:
        k = wrap_angle(fin["theta"] - th0)
    start = State2D(0.0, st["x"], st["y"], th0, st["v"], st["a"])
    target = State2D(1.0, fin["x"], fin["y"], th0 + k, fin["v"], fin["a"])
    try:
        cp = kin2d.connect_admissible_2d(start, target, k)
    except kin2d.ConnectivityError:
        if spec.model != MODEL_2D_FROZEN:
            return None
        # Off-line targets: connect along the heading using the projection.
        c, s = math.cos(th0), math.sin(th0)
        along = (fin["x"] - st["x"]) * c + (fin["y"] - st["y"]) * s
        target = State2D(1.0, st["x"] + along * c, st["y"] + along * s, th0, fin["v"], fin["a"])
        cp = kin2d.connect_admissible_2d(start, target, 0.0)
    p = kin2d.covector_from_controls(cp, th0, p_t).as_array()
    if spec.model == MODEL_2D_FROZEN:
        p = np.delete(p, 3)
    return p


def _scaled_spec(spec: BoundarySpec, sigma: float) -> BoundarySpec:
    """Boundary data moved a fraction ``sigma`` from rest toward ``spec``.

    At ``sigma = 0`` both ends sit at the initial position and heading with
    zero speed and acceleration, reached by the covector ``p_t = 1``.
    """
    names = spec.names
    x0 = dict(zip(names, spec.initial_state()))
    rest = {n: 0.0 for n in names}
    rest.update({n: x0[n] for n in ("x", "y", "theta") if n in x0})
    init = tuple(Fixed(rest[n] + sigma * (c.value - rest[n]))
                 for n, c in zip(names, spec.initial))
    rest_end = dict(rest, t=1.0)
    fin = tuple(Fixed(rest_end[n] + sigma * (c.value - rest_end[n])) if isinstance(c, Fixed) else c
                for n, c in zip(names, spec.final))
    return BoundarySpec(spec.model, init, fin)


def continuation(spec: BoundarySpec, opts: ShootingOptions, min_step: float = 1 / 64):
    """Track the solution from the rest problem to ``spec``; returns a covector or ``None``.

    The continuation parameter advances by up to half per stage and the
    stage is halved after a failed solve. Intermediate stages are solved to
    1e-6 with at most 25 iterations.
    """
    beta = np.zeros(len(spec.unknowns))
    beta[0] = 1.0
    stage = replace(opts, tol=max(opts.tol, 1e-6), max_iter=min(opts.max_iter, 25))
    sigma, step = 0.0, 0.25
    while sigma < 1.0:
        nxt = min(1.0, sigma + step)
        r = _newton(beta, _scaled_spec(spec, nxt), stage, -1)
        if r.converged:
            beta, sigma = r.beta0, nxt
            step = min(2 * step, 0.5)
        else:
            step *= 0.5
            if step < min_step:
                return None
    return beta


def projected_start(spec: BoundarySpec, opts: ShootingOptions) -> Optional[np.ndarray]:
    """Lift the 1D solution along a frozen heading to the frozen-model unknowns.

    With ``theta`` constant the planar flow is the 1D flow along the heading,
    with ``(p_x, p_y) = p_X (cos theta, sin theta)``. Returns ``None`` when the
    end points are not both fixed on the heading line or the 1D solve fails.
    """
    if spec.model != MODEL_2D_FROZEN:
        return None
    fin = dict(zip(spec.names, spec.final))
    ini = dict(zip(spec.names, spec.initial))
    if not all(isinstance(fin[n], Fixed) for n in ("t", "x", "y", "v", "a")):
        return None
    th = ini["theta"].value
    u = np.array([math.cos(th), math.sin(th)])
    d = np.array([fin["x"].value - ini["x"].value, fin["y"].value - ini["y"].value])
    along = float(d @ u)
    if abs(d[0] * u[1] - d[1] * u[0]) > 1e-9 * max(1.0, abs(along)):
        return None
    sub = BoundarySpec(MODEL_1D,
                       tuple(Fixed(ini[n].value) if n != "x" else Fixed(0.0) for n in STATE_1D),
                       tuple(Fixed(fin[n].value) if n != "x" else Fixed(along) for n in STATE_1D))
    try:
        r = solve(sub, replace(opts, warm_start=True, continuation=True))
    except NonConvergenceError:
        return None
    p_t, p_x, p_v, p_a = r.beta0
    return np.array([p_t, p_x * u[0], p_x * u[1], p_v, p_a])


def start_lattice(spec: BoundarySpec, opts: ShootingOptions) -> list[np.ndarray]:
    """All lattice points, ``p_t`` in ``{1/(1 + delta), 1, 1 + delta}``, others in
    ``{-delta, small, +delta}``."""
    d = opts.delta
    names = spec.unknowns
    axes = [(1.0 / (1.0 + d), 1.0, 1.0 + d) if n == "p_t" else (-d, opts.small, d) for n in names]
    return [np.array(c) for c in itertools.product(*axes)]


def _rank_key(r: ShootingResult):
    return (not r.converged, r.residual_norm, r.start_index)


def _prescreen(spec, opts, lattice):
    scored = []
    for i, beta in enumerate(lattice):
        try:
            n = float(np.linalg.norm(_residual(beta, spec, opts)))
        except IntegrationError:
            continue
        scored.append((n, i))
    scored.sort()
    return [i for _, i in scored[: opts.max_starts]]


def solve(spec: BoundarySpec, opts: Optional[ShootingOptions] = None,
          starts: Optional[Sequence] = None) -> ShootingResult:
    """Solve the boundary-value problem by multi-start damped Newton.

    Candidates are tried in order: explicit ``starts`` (if given), the
    warm start from the admissible connection curve, the lifted 1D solution
    for a frozen heading, the end point of a
    continuation from the rest problem, then the best ``max_starts`` lattice
    points by initial residual. The first converged
    candidate is returned; otherwise :class:`NonConvergenceError` carries the
    best attempt.
    """
    opts = opts or ShootingOptions()
    spec.check()
    candidates = [np.asarray(s, dtype=float) for s in (starts or ())]
    if opts.warm_start:
        ws = warm_start(spec)
        if ws is not None:
            candidates.append(ws)
        ps = projected_start(spec, opts)
        if ps is not None:
            candidates.append(ps)
    attempts = []
    for i, beta in enumerate(candidates):
        r = _newton(beta, spec, opts, i)
        attempts.append(r)
        if r.converged:
            return _finish(spec, opts, r)
    offset = len(candidates)
    if opts.continuation:
        beta = continuation(spec, opts)
        if beta is not None:
            r = _newton(beta, spec, opts, offset)
            attempts.append(r)
            if r.converged:
                return _finish(spec, opts, r)
        offset += 1
    lattice = start_lattice(spec, opts)
    for i in _prescreen(spec, opts, lattice):
        r = _newton(lattice[i], spec, opts, offset + i)
        attempts.append(r)
        if r.converged:
            return _finish(spec, opts, r)
    best = min(attempts, key=_rank_key) if attempts else None
    if best is not None:
        best = _attach(spec, opts, best)
    res = best.residual_norm if best else math.inf
    raise NonConvergenceError(
        f"no start converged ({len(attempts)} tried, best residual {res:.3g})", best, attempts)


def _attach(spec, opts, r: ShootingResult) -> ShootingResult:
    try:
        traj = _flow(spec, r.beta0, opts, samples=opts.samples)
    except IntegrationError:
        traj = None
    return replace(r, trajectory=traj)


def _finish(spec, opts, r: ShootingResult) -> ShootingResult:
    r = _attach(spec, opts, r)
    if r.trajectory is None:
        return replace(r, converged=False)
    return r


def solve_constrained_theta(spec: BoundarySpec, theta_fixed: float,
                            opts: Optional[ShootingOptions] = None,
                            starts: Optional[Sequence] = None) -> ShootingResult:
    """Solve with the heading frozen at ``theta_fixed`` (``theta' = 0``, ``p_theta = 0``).

    ``spec`` is a 2D spec; its theta conditions are replaced by the frozen
    heading at the start and left free at the end.
    """
    if spec.model not in (MODEL_2D, MODEL_2D_FROZEN):
        raise SpecError("heading constraint needs a 2D spec")
    initial = list(spec.initial)
    final = list(spec.final)
    initial[3] = Fixed(theta_fixed)
    final[3] = Free()
    frozen = BoundarySpec(MODEL_2D_FROZEN, tuple(initial), tuple(final))
    return solve(frozen, opts, starts)
