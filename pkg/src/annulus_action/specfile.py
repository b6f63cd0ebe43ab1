"""Map spec files.

A spec file is a small INI-like document::

    # comments run to the end of a line
    [chart]
    kind = annulus        # or: disk
    x_min = 0
    x_max = 1

    [map]
    expr = compose(rotation(0.25),
                   twist(1, 0))    # indented lines continue a value

    [normalization]
    anchor = upper        # upper | lower | x, y
    value = boundary      # boundary rotation number, or a number

    [tasks]
    k_max = 5
    a = 0, 0.5, 1

Only the [map] section is required.  Error messages carry the 1-based line
and column of the offending token.
"""
from dataclasses import dataclass, field
import math
import re

from . import expr as E
from .action import Normalization
from .errors import ParseError, ValidationError
from .mapdef import parse_map_line
from .surface import AnnulusChart, DiskChart

SECTIONS = ("chart", "map", "normalization", "tasks")
TASK_KEYS = {
    "k_max": int, "grid": int, "tol": float, "a": "floats", "birkhoff_n": int,
    "birkhoff_starts": int, "seed": int, "m_min": int, "m_max": int,
}
KEYS = {
    "chart": ("kind", "x_min", "x_max"),
    "map": ("expr",),
    "normalization": ("anchor", "value"),
    "tasks": tuple(TASK_KEYS),
}
_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]\s*$")
_KEY = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*")


@dataclass
class Entry:
    text: str
    line: int
    col: int


def _strip_comment(s):
    i = s.find("#")
    return s if i < 0 else s[:i]


def read_sections(source):
    """Section -> key -> Entry, with exact source positions."""
    sections = {}
    current = None
    last = None
    for n, raw in enumerate(source.splitlines(), start=1):
        body = _strip_comment(raw).rstrip()
        if not body.strip():
            continue
        if raw[:1] in " \t" and last is not None:
            last.text += "\n" + body
            continue
        stripped = body.lstrip()
        col0 = len(body) - len(stripped) + 1
        m = _HEADER.match(stripped)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise ValidationError(f"unknown section [{current}] (expected one of "
                                      f"{', '.join(SECTIONS)})", n, col0)
            if current in sections:
                raise ValidationError(f"duplicate section [{current}]", n, col0)
            sections[current] = {}
            last = None
            continue
        m = _KEY.match(stripped)
        if m is None:
            raise ParseError("expected 'key = value' or a [section] header", n, col0)
        if current is None:
            raise ParseError("key outside of any section", n, col0)
        key = m.group(1)
        if key not in KEYS[current]:
            raise ValidationError(f"unknown key {key!r} in [{current}] (expected one of "
                                  f"{', '.join(KEYS[current])})", n, col0)
        if key in sections[current]:
            raise ValidationError(f"duplicate key {key!r}", n, col0)
        last = Entry(stripped[m.end():], n, col0 + m.end())
        sections[current][key] = last
    return sections


def is_spec_file(source):
    return any(_HEADER.match(_strip_comment(l).strip()) for l in source.splitlines())


def _number(e):
    node = E.parse_expression(e.text, e.line, e.col)
    return E.constant_value(node)


def _numbers(e):
    """Comma-separated constants; a bare ``inf`` stands for infinity."""
    p = E.Parser(E.tokenize(e.text, e.line, e.col))
    items = [p.expression()]
    while p.accept(","):
        items.append(p.expression())
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return tuple(math.inf if isinstance(i, E.Var) and i.name == "inf" else E.constant_value(i)
                 for i in items)


@dataclass
class SpecFile:
    map: object
    normalization: Normalization = field(default_factory=Normalization)
    tasks: dict = field(default_factory=dict)

    def to_text(self):
        c = self.map.chart
        lines = ["[chart]"]
        if c.kind == "disk":
            lines.append("kind = disk")
        else:
            lines += ["kind = annulus", f"x_min = {c.x_min!r}", f"x_max = {c.x_max!r}"]
        lines += ["", "[map]", f"expr = {self.map.ast.to_text()}", "", "[normalization]"]
        a = self.normalization.anchor
        lines.append(f"anchor = {a}" if isinstance(a, str) else f"anchor = {a[0]!r}, {a[1]!r}")
        v = self.normalization.value
        lines.append("value = boundary" if v is None else f"value = {v!r}")
        if self.tasks:
            lines += ["", "[tasks]"]
            for k in TASK_KEYS:
                if k in self.tasks:
                    v = self.tasks[k]
                    if isinstance(v, tuple):
                        v = ", ".join(repr(float(x)) for x in v)
                    lines.append(f"{k} = {v!r}" if not isinstance(v, str) else f"{k} = {v}")
        return "\n".join(lines) + "\n"


def load_spec(source):
    """Parse a spec document into a SpecFile."""
    sec = read_sections(source)
    if "map" not in sec or "expr" not in sec["map"]:
        raise ValidationError("missing [map] section with an 'expr' key", 1, 1)
    chart = None
    if "chart" in sec:
        c = sec["chart"]
        kind = c["kind"].text.strip() if "kind" in c else "annulus"
        if kind == "disk":
            if "x_min" in c or "x_max" in c:
                e = c.get("x_min") or c.get("x_max")
                raise ValidationError("the disk chart takes no bounds", e.line, e.col)
            chart = DiskChart()
        elif kind == "annulus":
            lo = _number(c["x_min"]) if "x_min" in c else 0.0
            hi = _number(c["x_max"]) if "x_max" in c else 1.0
            try:
                chart = AnnulusChart(lo, hi)
            except ValidationError as exc:
                e = c.get("x_min") or c.get("x_max")
                raise ValidationError(str(exc), e.line, e.col) from None
        else:
            e = c["kind"]
            raise ValidationError(f"unknown chart kind {kind!r} (expected annulus or disk)",
                                  e.line, e.col)
    e = sec["map"]["expr"]
    m = parse_map_line(e.text, e.line, e.col, chart=chart)
    if chart is not None and m.chart != chart:
        raise ValidationError("chart given twice with different values", e.line, e.col)

    norm = Normalization()
    if "normalization" in sec:
        n = sec["normalization"]
        anchor = "upper"
        if "anchor" in n:
            t = n["anchor"].text.strip()
            if t in ("upper", "lower"):
                anchor = t
            else:
                pt = _numbers(n["anchor"])
                if len(pt) != 2:
                    raise ValidationError("anchor must be upper, lower or a point x, y",
                                          n["anchor"].line, n["anchor"].col)
                anchor = pt
        value = None
        if "value" in n and n["value"].text.strip() != "boundary":
            value = _number(n["value"])
        if value is None and not isinstance(anchor, str):
            value = 0.0
        norm = Normalization(anchor, value)

    tasks = {}
    for key, e in sec.get("tasks", {}).items():
        kind = TASK_KEYS[key]
        if kind == "floats":
            tasks[key] = _numbers(e)
        else:
            v = _number(e)
            if kind is int:
                if v != int(v):
                    raise ValidationError(f"{key} must be an integer", e.line, e.col)
                v = int(v)
            tasks[key] = v
    return SpecFile(m, norm, tasks)
