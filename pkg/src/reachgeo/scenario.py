"""Scenario files: boundary conditions, solver options and output settings.

Two encodings are accepted. The text form is INI-like::

    [scenario]
    name = fig4-prescribed
    model = 2d                 # 1d | 2d | 2d-theta-frozen

    [initial]
    t = 0
    x = 0
    y = 0
    theta = pi/6
    v = 0
    a = pi/3

    [final]
    t = 1
    x = 0.022041
    y = 0.138581
    theta = 3*pi/4
    v = 0
    a = [-pi/3, -pi/6]         # interval: scanned on a grid
    ...

Values are arithmetic expressions over ``pi``, ``e``, ``tau`` and the
functions ``sqrt``, ``sin``, ``cos``, ``tan``. ``free`` (or omitting the key)
leaves a coordinate unconstrained. Files ending in ``.json`` use the same
sections as nested objects.
"""

from __future__ import annotations

import ast
import configparser
import json
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .odeint import StepControl
from .shooting import (
    MODELS, BoundarySpec, Fixed, Free, Interval, ShootingOptions, SpecError,
    state_names,
)

SECTIONS = ("scenario", "initial", "final", "solver", "output")
SOLVER_KEYS = {
    "tol": float, "max_iter": int, "max_halvings": int, "fd_step": float, "delta": float,
    "small": float, "max_starts": int, "flow_tol": float, "fixed_step": float, "grid": int,
    "require_admissible": bool, "warm_start": bool, "continuation": bool,
}
OUTPUT_KEYS = {"samples": int, "plot": str}
SCENARIO_KEYS = {"name", "model", "description"}

_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e, "tau": math.tau}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan}


class ScenarioError(ValueError):
    """Malformed scenario; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.message = message
        self.line = line
        self.path = path
        where = path or "<scenario>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
        return _BIN[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand))
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")


def parse_number(text: str) -> float:
    """Evaluate an arithmetic expression such as ``-9*pi/20``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
        val = _eval_node(tree.body)
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as err:
        raise ValueError(f"cannot evaluate {text.strip()!r}: {err}") from None
    if not math.isfinite(val):
        raise ValueError(f"{text.strip()!r} is not finite")
    return val


def parse_condition(raw):
    """``free`` / ``None`` -> Free, ``[lo, hi]`` -> Interval, expression -> Fixed."""
    if raw is None:
        return Free()
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return Fixed(raw)
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise ValueError("interval needs exactly two bounds")
        lo, hi = (b if isinstance(b, (int, float)) else parse_number(str(b)) for b in raw)
        if not lo <= hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        return Interval(lo, hi) if lo < hi else Fixed(lo)
    text = str(raw).strip()
    if text.lower() == "free":
        return Free()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError("unterminated interval")
        parts = text[1:-1].split(",")
        if len(parts) != 2:
            raise ValueError("interval needs exactly two bounds")
        return parse_condition(parts)
    return Fixed(parse_number(text))


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(kind, raw):
    if kind is bool:
        return _parse_bool(raw)
    if kind is int:
        val = parse_number(str(raw)) if not isinstance(raw, (int, float)) else raw
        if val != int(val):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(val)
    if kind is float:
        return float(raw) if isinstance(raw, (int, float)) else parse_number(str(raw))
    return str(raw)


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    spec: BoundarySpec
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    description: str = ""
    path: Optional[str] = None

    def options(self, tol: Optional[float] = None, fixed_step: Optional[float] = None) -> ShootingOptions:
        """Shooting options with command-line overrides applied."""
        kw = {k: v for k, v in self.solver.items()
              if k in ShootingOptions.__dataclass_fields__}
        if tol is not None:
            kw["tol"] = tol
        step = fixed_step if fixed_step is not None else self.solver.get("fixed_step")
        if step is not None:
            kw["ctrl"] = StepControl.fixed(step)
        elif "flow_tol" in self.solver:
            kw["ctrl"] = StepControl.adaptive(self.solver["flow_tol"])
        kw["samples"] = self.samples
        return ShootingOptions(**kw)

    @property
    def samples(self) -> int:
        return int(self.output.get("samples", 101))

    @property
    def grid(self) -> int:
        return int(self.solver.get("grid", 16))


class _Lines:
    """Line lookup for sections and keys of an INI text."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def section(self, name: str) -> Optional[int]:
        pat = re.compile(r"^\s*\[\s*" + re.escape(name) + r"\s*\]")
        for i, line in enumerate(self.lines, 1):
            if pat.match(line):
                return i
        return None

    def key(self, section: str, key: str) -> Optional[int]:
        start = self.section(section)
        if start is None:
            return None
        pat = re.compile(r"^\s*" + re.escape(key) + r"\s*[=:]", re.IGNORECASE)
        for i in range(start, len(self.lines)):
            line = self.lines[i]
            if re.match(r"^\s*\[", line):
                break
            if pat.match(line):
                return i + 1
        return start


def _read_ini(text: str, path: Optional[str]):
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<scenario>")
    except configparser.DuplicateSectionError as err:
        raise ScenarioError(f"duplicate section [{err.section}]", err.lineno, path) from None
    except configparser.DuplicateOptionError as err:
        raise ScenarioError(f"duplicate key {err.option!r} in [{err.section}]",
                            err.lineno, path) from None
    except configparser.MissingSectionHeaderError as err:
        raise ScenarioError("content before the first [section]", err.lineno, path) from None
    except configparser.ParsingError as err:
        line = err.errors[0][0] if err.errors else None
        raise ScenarioError("malformed line", line, path) from None
    data = {s: dict(parser.items(s)) for s in parser.sections()}
    return data, _Lines(text)


def _build(data: dict, lines: Optional[_Lines], path: Optional[str]) -> tuple[Scenario, list]:
    """Scenario plus structural issues; raises ScenarioError on malformed values."""

    def line_of(section, key=None):
        if lines is None:
            return None
        return lines.section(section) if key is None else lines.key(section, key)

    for sec in data:
        if sec not in SECTIONS:
            raise ScenarioError(f"unknown section [{sec}]", line_of(sec), path)
    head = data.get("scenario")
    if head is None:
        raise ScenarioError("missing [scenario] section", None, path)
    for key in head:
        if key not in SCENARIO_KEYS:
            raise ScenarioError(f"unknown key {key!r} in [scenario]", line_of("scenario", key), path)
    name = str(head.get("name", "")).strip()
    if not name:
        raise ScenarioError("scenario needs a name", line_of("scenario"), path)
    model = str(head.get("model", "")).strip()
    if model not in MODELS:
        raise ScenarioError(f"model must be one of {', '.join(MODELS)}",
                            line_of("scenario", "model"), path)
    names = state_names(model)
    ends = {}
    for side in ("initial", "final"):
        sec = data.get(side)
        if sec is None:
            raise ScenarioError(f"missing [{side}] section", None, path)
        conds = {}
        for key, raw in sec.items():
            if key not in names:
                raise ScenarioError(f"unknown coordinate {key!r} for model {model}",
                                    line_of(side, key), path)
            try:
                conds[key] = parse_condition(raw)
            except ValueError as err:
                raise ScenarioError(str(err), line_of(side, key), path) from None
        ends[side] = tuple(conds.get(n, Free()) for n in names)
    spec = BoundarySpec(model, ends["initial"], ends["final"])
    solver, output = {}, {}
    for sec_name, table, out in (("solver", SOLVER_KEYS, solver), ("output", OUTPUT_KEYS, output)):
        for key, raw in data.get(sec_name, {}).items():
            if key not in table:
                raise ScenarioError(f"unknown key {key!r} in [{sec_name}]",
                                    line_of(sec_name, key), path)
            try:
                out[key] = _convert(table[key], raw)
            except ValueError as err:
                raise ScenarioError(str(err), line_of(sec_name, key), path) from None
    issues = list(spec.issues())
    for key, lo in (("tol", 0.0), ("delta", 0.0), ("fixed_step", 0.0), ("flow_tol", 0.0)):
        if key in solver and not solver[key] > lo:
            issues.append(f"solver {key}: must be positive")
    if solver.get("grid", 1) < 1 or output.get("samples", 2) < 2:
        issues.append("grid must be >= 1 and samples >= 2")
    scen = Scenario(name, model, spec, solver, output, str(head.get("description", "")).strip(), path)
    return scen, issues


def loads(text: str, path: Optional[str] = None, fmt: Optional[str] = None) -> tuple[Scenario, list]:
    """Parse scenario text; returns the scenario and its list of validation issues."""
    if fmt is None:
        fmt = "json" if (path or "").endswith(".json") or text.lstrip().startswith("{") else "ini"
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ScenarioError(f"invalid JSON: {err.msg}", err.lineno, path) from None
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ScenarioError("JSON scenario must map section names to objects", None, path)
        return _build(data, None, path)
    data, lines = _read_ini(text, path)
    return _build(data, lines, path)


def load(path) -> tuple[Scenario, list]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ScenarioError(f"cannot read file: {err.strerror}", None, str(path)) from None
    return loads(text, str(path))


def bundled_dir() -> Path:
    return Path(__file__).with_name("scenarios")


def bundled() -> dict[str, Path]:
    """Bundled scenario names mapped to their files."""
    return {p.stem: p for p in sorted(bundled_dir().glob("*.scn"))}


def resolve(ref: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(ref)
    if p.exists():
        return p
    table = bundled()
    if ref in table:
        return table[ref]
    raise ScenarioError("no such file or bundled scenario", None, ref)
