import json
import math
from fractions import Fraction
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from annulus_action import report as R
from annulus_action.analysis import Diagram, MeasurePoint, build_diagram, Invariants
from annulus_action.mapdef import parse_map_line


@pytest.mark.parametrize("v, s", [
    (0.1 + 0.2, "0.3"),
    (2 / 3, "0.666666666667"),
    (-0.0, "0"),
    (-1e-300 * 1e-300, "0"),
    (math.inf, "inf"),
    (-math.inf, "-inf"),
    (math.nan, "nan"),
    (1e20, "1e+20"),
])
def test_fmt(v, s):
    assert R.fmt(v) == s


def test_clean_types():
    out = R.clean({"a": np.float64(1 / 3), "b": [np.int64(2), Fraction(1, 4)], "c": np.bool_(True),
                   "d": np.array([0.1, math.inf]), 5: "x"})
    assert out == {"a": 0.333333333333, "b": [2, 0.25], "c": True, "d": [0.1, "inf"], "5": "x"}
    json.dumps(out)


def test_header_and_dumps():
    m = parse_map_line("twist(1, 0)")
    h = R.header(m, {"k_max": 5})
    assert h["tool_version"] == R.TOOL_VERSION
    assert h["map_hash"] == m.hash and len(h["map_hash"]) == 64
    text = R.dumps(h, {"value": 2 / 3})
    data = json.loads(text)
    assert data["value"] == 0.666666666667
    assert list(data) == ["header", "value"]


def test_csv_layout():
    h = {"tool_version": R.TOOL_VERSION, "config": {"seed": 0}}
    pts = [MeasurePoint(0.5, 2 / 3, "lebesgue"), MeasurePoint(0.25, 0.5, "birkhoff")]
    text = R.diagram_csv(h, pts)
    lines = text.splitlines()
    assert lines[0].startswith("# tool_version: ")
    assert lines[2] == ",".join(R.CSV_COLUMNS)
    assert lines[3] == "0.5,0.666666666667,lebesgue,,,"


@pytest.mark.parametrize("lo, hi", [(0.0, 1.0), (0.2496, 0.4), (-3.0, 17.0), (1e-4, 3e-4)])
def test_ticks_are_round_and_inside(lo, hi):
    t = R._ticks(lo, hi)
    assert 2 <= len(t) <= 11
    assert all(lo - 1e-9 <= v <= hi + 1e-9 for v in t)
    step = t[1] - t[0]
    mant = step / 10 ** math.floor(math.log10(step))
    assert min(abs(mant - m) for m in (1, 2, 5, 10)) < 1e-9


def test_clip():
    box = (0, 1, 0, 1)
    assert R._clip((-1, 0.5), (2, 0.5), box) == ((0, 0.5), (1, 0.5))
    assert R._clip((-1, 2), (2, 2), box) is None


def test_svg_is_well_formed():
    inv = Invariants(0.0, 1.0, 0.5, 2 / 3, 0.5)
    pts = [MeasurePoint(0.0, 0.5, "orbit"), MeasurePoint(1.0, 1.0, "orbit"),
           MeasurePoint(0.5, 0.625, "orbit")]
    d = build_diagram(pts, MeasurePoint(0.5, 2 / 3, "lebesgue"), inv=inv,
                      a_values=(0.0, 1.0, math.inf))
    svg = R.diagram_svg(d, "twist(1, 0) <& test>")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "&lt;&amp; test&gt;" in svg
    assert svg.count("<circle") == 4 + 2  # points + legend entries
    assert "a=0" in svg and "a=1" in svg


def test_svg_single_point():
    d = Diagram([MeasurePoint(0.7071, 0.7071, "lebesgue")], [(0.7071, 0.7071)], None, None, [], [])
    ET.fromstring(R.diagram_svg(d))
