import json
import math

import pytest

from reachgeo.scenario import (
    ScenarioError, bundled, load, loads, parse_condition, parse_number, resolve,
)
from reachgeo.shooting import Fixed, Free, Interval

BASE = """\
[scenario]
name = demo
model = 1d

[initial]
t = 0
x = 0
v = 0
a = 0

[final]
t = 1
x = 0.01   # inline comment
v = 0
a = 0
"""


def test_expressions():
    assert parse_number("-9*pi/20") == pytest.approx(-9 * math.pi / 20)
    assert parse_number("sqrt(2)/2") == pytest.approx(math.sqrt(0.5))
    for bad in ("__import__('os')", "1/0", "x + 1", "2**2000.0"):
        with pytest.raises(ValueError):
            parse_number(bad)


def test_conditions():
    assert parse_condition("free") == Free()
    assert parse_condition("[0, pi/2]") == Interval(0.0, math.pi / 2)
    assert parse_condition("[1, 1]") == Fixed(1.0)
    assert parse_condition("3*pi/8") == Fixed(3 * math.pi / 8)
    with pytest.raises(ValueError):
        parse_condition("[2, 1]")
    with pytest.raises(ValueError):
        parse_condition("[1, 2")


def test_minimal_ini():
    sc, issues = loads(BASE)
    assert issues == []
    assert sc.name == "demo" and sc.model == "1d"
    assert sc.spec.final[1] == Fixed(0.01)
    assert sc.samples == 101


def test_json_alternative():
    data = {"scenario": {"name": "j", "model": "1d"},
            "initial": {"t": 0, "x": 0, "v": 0, "a": 0},
            "final": {"t": 1, "x": "0.01", "v": 0, "a": [-1, 1]},
            "solver": {"tol": 1e-9, "max_starts": 2}}
    sc, issues = loads(json.dumps(data), fmt="json")
    assert issues == []
    assert sc.spec.final[3] == Interval(-1.0, 1.0)
    assert sc.options().tol == 1e-9 and sc.options().max_starts == 2


def test_solver_section_and_overrides():
    sc, _ = loads(BASE + "\n[solver]\ndelta = 2\nflow_tol = 1e-9\nwarm_start = no\n")
    opts = sc.options()
    assert opts.delta == 2 and not opts.warm_start
    assert opts.ctrl.abs_tol == 1e-9
    assert sc.options(fixed_step=0.01).ctrl.mode == "fixed"
    assert sc.options(tol=1e-6).tol == 1e-6


@pytest.mark.parametrize("text, needle, line", [
    (BASE.replace("x = 0.01", "x = 0.0.1"), "cannot evaluate", 13),
    (BASE.replace("model = 1d", "model = 3d"), "model must be", 3),
    (BASE + "\n[extra]\nq = 1\n", "unknown section", 17),
    (BASE.replace("a = 0\n\n[final]", "a = 0\nz = 1\n\n[final]"), "unknown coordinate", 10),
    ("x = 1\n" + BASE, "before the first", 1),
])
def test_parse_errors_carry_line(text, needle, line):
    with pytest.raises(ScenarioError) as info:
        loads(text, path="demo.scn")
    assert needle in str(info.value)
    assert info.value.line == line
    assert str(info.value).startswith(f"demo.scn:{line}:")


def test_structural_issues_are_reported_not_raised():
    sc, issues = loads(BASE.replace("x = 0.01   # inline comment", "x = [0, 1]"))
    assert any("intervals allowed only on theta/accel" in m for m in issues)
    sc, issues = loads(BASE.replace("a = 0\n", "a = free\n").replace("a = free\n", "a = 0\n", 1))
    assert any("non-square system: 3 final conditions for 4 covector unknowns" in m for m in issues)


def test_bundled_scenarios_validate():
    names = bundled()
    assert len(names) == 15
    for name, path in names.items():
        sc, issues = load(path)
        assert issues == [], name
        assert sc.name == name


def test_resolve_by_name_and_missing():
    assert resolve("fig2-1d-centerout").name == "fig2-1d-centerout.scn"
    with pytest.raises(ScenarioError):
        resolve("no-such-scenario")
