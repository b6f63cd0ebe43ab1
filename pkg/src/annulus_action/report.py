"""Report headers, JSON/CSV writers and the hand-written SVG diagram.

Every float goes through :func:`clean`, which rounds to 12 significant
digits, so identical runs give byte-identical files.
"""
from fractions import Fraction
import json
import math
from pathlib import Path

import numpy as np

from . import expr as E

TOOL_VERSION = "0.1.0"
DIGITS = 12

KIND_COLORS = {"orbit": "#1f77b4", "birkhoff": "#7f7f7f", "center": "#9467bd",
               "lebesgue": "#d62728"}


def fmt(v):
    """Float as text with 12 significant digits; inf/nan spelled out."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = format(v, f".{DIGITS}g")
    return "0" if s == "-0" else s


def clean(obj):
    """JSON-ready copy with floats rounded and numpy/Fraction values converted."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        v = float(obj)
        if math.isinf(v) or math.isnan(v):
            return fmt(v)
        return float(fmt(v))
    return obj


def header(map_, config):
    return {
        "tool_version": TOOL_VERSION,
        "map_hash": map_.hash,
        "map": map_.to_text(),
        "config": dict(config),
        "bump_profile": E.BUMP_DESCRIPTION,
    }


def dumps(header_, body):
    return json.dumps(clean({"header": header_, **body}), indent=2) + "\n"


def write_json(path, header_, body):
    Path(path).write_text(dumps(header_, body))
    return Path(path)


# ---------------------------------------------------------------------------
# CSV

CSV_COLUMNS = ("rho", "action", "kind", "k", "m", "continuum")


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def diagram_csv(header_, points):
    lines = [f"# {k}: {json.dumps(clean(v), sort_keys=True)}" for k, v in header_.items()]
    lines.append(",".join(CSV_COLUMNS))
    for p in points:
        row = p.row()
        lines.append(",".join(_cell(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG

W, H = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 30, 30, 60


def _c(v):
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    """Round tick values (steps of 1, 2 or 5 times a power of ten) in [lo, hi]."""
    raw = (hi - lo) / max(1, n - 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    return [k * step for k in range(first, int(math.floor(hi / step + 1e-9)) + 1)]


def _padded(lo, hi, min_span=0.1):
    """Axis range with 8% margins, at least ``min_span`` wide so that
    numerically constant coordinates are not magnified into noise."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return -1.0, 1.0
    mid = 0.5 * (lo + hi)
    half = max(0.54 * (hi - lo), 0.5 * min_span)
    return mid - half, mid + half


def _clip(p, q, box):
    """Liang-Barsky clip of segment pq to box (x0, x1, y0, y1)."""
    x0, x1, y0, y1 = box
    dx, dy = q[0] - p[0], q[1] - p[1]
    t0, t1 = 0.0, 1.0
    for d, lo, hi, s in ((dx, x0, x1, p[0]), (dy, y0, y1, p[1])):
        if d == 0:
            if s < lo or s > hi:
                return None
            continue
        a, b = (lo - s) / d, (hi - s) / d
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
        if t0 > t1:
            return None
    return (p[0] + t0 * dx, p[1] + t0 * dy), (p[0] + t1 * dx, p[1] + t1 * dy)


def diagram_svg(diagram, title=""):
    """Static SVG of an action-rotation diagram."""
    xs = [p.rho for p in diagram.points]
    ys = [p.action for p in diagram.points]
    if diagram.theta0 is not None:
        xs.append(diagram.theta0)
    bx = _padded(min(xs), max(xs))
    by = _padded(min(ys), max(ys))
    box = (bx[0], bx[1], by[0], by[1])
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - bx[0]) / (bx[1] - bx[0]) * pw

    def sy(v):
        return TOP + ph - (v - by[0]) / (by[1] - by[0]) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if len(title) > 90:
        title = title[:87] + "..."
    if title:
        out.append(f'<text x="{W / 2:.0f}" y="18" text-anchor="middle">{_escape(title)}</text>')
    # axes and ticks
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" '
               'stroke="black"/>')
    for v in _ticks(*bx):
        out.append(f'<line x1="{_c(sx(v))}" y1="{TOP + ph}" x2="{_c(sx(v))}" '
                   f'y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_c(sx(v))}" y="{TOP + ph + 18}" text-anchor="middle">'
                   f'{v:.4g}</text>')
    for v in _ticks(*by):
        out.append(f'<line x1="{LEFT - 5}" y1="{_c(sy(v))}" x2="{LEFT}" y2="{_c(sy(v))}" '
                   'stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_c(sy(v) + 4)}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.0f}" y="{H - 15}" text-anchor="middle">'
               'rotation number</text>')
    out.append(f'<text x="15" y="{TOP + ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {TOP + ph / 2:.0f})">mean action</text>')
    # hull
    if len(diagram.hull) >= 3:
        pts = " ".join(f"{_c(sx(x))},{_c(sy(y))}" for x, y in diagram.hull)
        out.append(f'<polygon points="{pts}" fill="#1f77b4" fill-opacity="0.12" '
                   'stroke="#1f77b4"/>')
    elif len(diagram.hull) == 2:
        (x0, y0), (x1, y1) = diagram.hull
        out.append(f'<line x1="{_c(sx(x0))}" y1="{_c(sy(y0))}" x2="{_c(sx(x1))}" '
                   f'y2="{_c(sy(y1))}" stroke="#1f77b4"/>')
    # rho = theta0 and the a-lines
    if diagram.theta0 is not None and bx[0] <= diagram.theta0 <= bx[1]:
        t = sx(diagram.theta0)
        out.append(f'<line x1="{_c(t)}" y1="{TOP}" x2="{_c(t)}" y2="{TOP + ph}" '
                   'stroke="black" stroke-dasharray="2,3"/>')
    for line in diagram.a_lines:
        a = line["a"]
        if math.isinf(a):
            continue  # the a = inf line is rho = theta0
        p = (bx[0], line["intercept"] - a * bx[0])
        q = (bx[1], line["intercept"] - a * bx[1])
        seg = _clip(p, q, box)
        if seg is None:
            continue
        (x0, y0), (x1, y1) = seg
        out.append(f'<line x1="{_c(sx(x0))}" y1="{_c(sy(y0))}" x2="{_c(sx(x1))}" '
                   f'y2="{_c(sy(y1))}" stroke="green" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{_c(sx(x1) - 4)}" y="{_c(sy(y1) - 4)}" fill="green" '
                   f'text-anchor="end">a={a:g}</text>')
    # points, Lebesgue last so it stays on top
    for p in sorted(diagram.points, key=lambda p: p.kind == "lebesgue"):
        color = KIND_COLORS.get(p.kind, "black")
        r = 5 if p.kind == "lebesgue" else 3
        out.append(f'<circle cx="{_c(sx(p.rho))}" cy="{_c(sy(p.action))}" r="{r}" '
                   f'fill="{color}"><title>{p.kind} ({fmt(p.rho)}, {fmt(p.action)})'
                   '</title></circle>')
    # legend, bottom right
    kinds = [k for k in ("orbit", "birkhoff", "center", "lebesgue")
             if any(p.kind == k for p in diagram.points)]
    ly = TOP + ph - 10 - 14 * (len(kinds) - 1)
    for kind in kinds:
        out.append(f'<circle cx="{LEFT + pw - 80}" cy="{ly - 4}" r="4" '
                   f'fill="{KIND_COLORS[kind]}"/>')
        out.append(f'<text x="{LEFT + pw - 72}" y="{ly}">{kind}</text>')
        ly += 14
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
