"""Command-line front end: run scenario files and export trajectories.

Usage::

    reachgeo run <file|name> [--out DIR] [--tol X] [--grid N] [--fixed-step H]
    reachgeo validate <file|name>
    reachgeo list-scenarios

``run`` writes ``trajectory.csv``, ``summary.json`` and ``plot.vl.json`` (a
Vega-Lite specification) into the output directory; fiber scans also write
``family.csv`` with every converged grid member. Exit status is 0 on
success, 2 on malformed input and 3 when the solver fails, in which case
``diagnostics.json`` is written instead.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .engel1d import hamiltonian_1d_array
from .geomcore import (
    COVECTOR_1D, COVECTOR_2D, MODEL_1D, STATE_1D, STATE_2D, Trajectory, curve_energy,
    horizontal_speed_factor, unit_span_controls,
)
from .kin2d import hamiltonian_2d_array
from .scenario import Scenario, ScenarioError, bundled, load, resolve
from .setgeo import NoGeodesicError, ScanResult, geodesic_length, scan
from .shooting import NonConvergenceError, ShootingResult, solve

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

CSV_COLUMNS_2D = ("s",) + STATE_2D + COVECTOR_2D + ("H",)
CSV_COLUMNS_1D = ("s",) + STATE_1D + COVECTOR_1D + ("H",)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def hamiltonian(traj: Trajectory) -> np.ndarray:
    if traj.model == MODEL_1D:
        return hamiltonian_1d_array(traj.y)
    return hamiltonian_2d_array(traj.y)


def csv_columns(traj: Trajectory) -> tuple[str, ...]:
    return CSV_COLUMNS_1D if traj.model == MODEL_1D else CSV_COLUMNS_2D


def trajectory_rows(traj: Trajectory):
    h = hamiltonian(traj)
    for i in range(len(traj)):
        yield [traj.s[i], *traj.y[i], h[i]]


def write_csv(path: Path, traj: Trajectory):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_columns(traj))
        for row in trajectory_rows(traj):
            w.writerow([_fmt(v) for v in row])


def write_family_csv(path: Path, members: Sequence[tuple[int, Trajectory]]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("member",) + csv_columns(members[0][1]))
        for k, traj in members:
            for row in trajectory_rows(traj):
                w.writerow([str(k)] + [_fmt(v) for v in row])


def read_csv(path: Path, model: str) -> Trajectory:
    """Read a trajectory CSV written by :func:`write_csv`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1:-1], model)


def diagnostics(traj: Trajectory) -> dict:
    """Lengths, energies and conservation drifts of a normal-flow trajectory."""
    h = hamiltonian(traj)
    factor = horizontal_speed_factor(traj)
    if traj.model == MODEL_1D:
        speed_sq = factor ** 2 + traj.col("p_a") ** 2
        constants = ("p_t", "p_x")
    else:
        speed_sq = factor ** 2 + traj.col("p_theta") ** 2 + traj.col("p_a") ** 2
        constants = ("p_t", "p_x", "p_y")
    length = geodesic_length(traj)
    energy = curve_energy(traj, unit_span_controls(traj))
    return {
        "length": length,
        "energy_constant_speed": energy,
        "energy_length_gap": abs(energy - 0.5 * length ** 2),
        "hamiltonian": float(h[0]),
        "drift": {
            "H": float(np.max(np.abs(h - h[0]))),
            "speed_squared": float(np.ptp(speed_sq)),
            **{c: float(np.ptp(traj.col(c))) for c in constants},
        },
        "min_x1_coefficient": float(np.min(factor)),
        "duration": float(traj.col("t")[-1] - traj.col("t")[0]),
    }


def _result_json(scen: Scenario, r: ShootingResult) -> dict:
    return {
        "converged": bool(r.converged),
        "residual_norm": r.residual_norm,
        "iterations": r.iterations,
        "start_index": r.start_index,
        "beta0": dict(zip(scen.spec.unknowns, map(float, r.beta0))),
    }


def plot_spec(traj: Trajectory, family: bool) -> dict:
    """Vega-Lite panels: path (x-y or t-x), t-v and t-a."""
    path = ("x", "y") if traj.model != MODEL_1D else ("t", "x")
    panels = []
    for xf, yf in (path, ("t", "v"), ("t", "a")):
        enc = {
            "x": {"field": xf, "type": "quantitative"},
            "y": {"field": yf, "type": "quantitative"},
            "order": {"field": "s", "type": "quantitative"},
        }
        best = {"data": {"url": "trajectory.csv"}, "mark": {"type": "line", "color": "red"},
                "encoding": enc}
        if family:
            members = {"data": {"url": "family.csv"},
                       "mark": {"type": "line", "color": "gray", "opacity": 0.5},
                       "encoding": dict(enc, detail={"field": "member", "type": "nominal"})}
            panels.append({"layer": [members, best], "width": 240, "height": 240})
        else:
            panels.append(dict(best, width=240, height=240))
    return {"$schema": "https://vega.github.io/schema/vega-lite/v5.json", "hconcat": panels}


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(x):
    """JSON has no infinities; encode them as null."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def run_scenario(scen: Scenario, out: Path, tol: Optional[float] = None,
                 grid: Optional[int] = None, fixed_step: Optional[float] = None) -> int:
    opts = scen.options(tol, fixed_step)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"name": scen.name, "model": scen.model, "description": scen.description}
    if not scen.spec.has_intervals():
        try:
            res = solve(scen.spec, opts)
        except NonConvergenceError as err:
            diag = dict(summary, error=str(err))
            if err.best is not None:
                diag["best"] = _result_json(scen, err.best)
                diag["trace"] = [list(t) for t in err.best.trace]
            _write_json(out / "diagnostics.json", _clean(diag))
            print(f"{scen.name}: solver failed: {err}", file=sys.stderr)
            return EXIT_SOLVER
        summary.update(mode="solve", **_result_json(scen, res), **diagnostics(res.trajectory))
        write_csv(out / "trajectory.csv", res.trajectory)
        _write_json(out / "plot.vl.json", plot_spec(res.trajectory, family=False))
        _write_json(out / "summary.json", _clean(summary))
        return EXIT_OK
    counts = {}
    n = grid if grid is not None else scen.grid
    for side, conds in (("initial", scen.spec.initial), ("final", scen.spec.final)):
        for name in scen.spec.names:
            counts[(side, name)] = n
    try:
        sr = scan(scen.spec, opts, counts)
    except NoGeodesicError as err:
        diag = dict(summary, error=str(err), grid=_grid_json(scen, err.scan))
        _write_json(out / "diagnostics.json", _clean(diag))
        print(f"{scen.name}: solver failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    best = sr.best
    summary.update(
        mode="scan",
        axes=list(sr.axes),
        converged_fraction=sr.converged_fraction,
        argmin={"index": list(best.index), **best.values},
        **_result_json(scen, best.result),
        **diagnostics(best.result.trajectory),
        grid=_grid_json(scen, sr),
    )
    members = [(k, p.result.trajectory) for k, p in enumerate(sr.points) if p.converged]
    write_csv(out / "trajectory.csv", best.result.trajectory)
    write_family_csv(out / "family.csv", members)
    _write_json(out / "plot.vl.json", plot_spec(best.result.trajectory, family=True))
    _write_json(out / "summary.json", _clean(summary))
    return EXIT_OK


def _grid_json(scen: Scenario, sr: ScanResult) -> list:
    rows = []
    for k, p in enumerate(sr.points):
        rows.append({
            "member": k,
            "index": list(p.index),
            **p.values,
            "converged": p.converged,
            "length": p.length,
            "residual_norm": p.result.residual_norm if p.result is not None else None,
            "argmin": p is sr.best,
            **({"error": p.error} if p.error else {}),
        })
    return rows


def _load(ref: str):
    return load(resolve(ref))


def cmd_run(args) -> int:
    try:
        scen, issues = _load(args.file)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if issues:
        for msg in issues:
            print(f"error: {scen.path}: {msg}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path("out") / scen.name
    status = run_scenario(scen, out, args.tol, args.grid, args.fixed_step)
    if status == EXIT_OK:
        print(f"{scen.name}: wrote {out}")
    return status


def cmd_validate(args) -> int:
    try:
        scen, issues = _load(args.file)
    except ScenarioError as err:
        print(f"error: {err}")
        return EXIT_INPUT
    if issues:
        for msg in issues:
            print(f"issue: {msg}")
        return EXIT_INPUT
    print(f"{scen.name}: ok")
    return EXIT_OK


def cmd_list(args) -> int:
    for name, path in bundled().items():
        try:
            scen, _ = load(path)
            desc = scen.description
        except ScenarioError:
            desc = "(unreadable)"
        print(f"{name:28s} {desc}")
    return EXIT_OK


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reachgeo", description="Geodesic reaching trajectories.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve a scenario and write outputs")
    r.add_argument("file", help="scenario file or bundled scenario name")
    r.add_argument("--out", help="output directory (default out/<name>)")
    r.add_argument("--tol", type=_positive(float), help="residual tolerance")
    r.add_argument("--grid", type=_positive(int), help="grid points per interval")
    r.add_argument("--fixed-step", type=_positive(float), dest="fixed_step",
                   help="use fixed-step RK4 with this step")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario without solving")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
