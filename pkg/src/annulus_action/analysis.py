"""Witness searches for the action/rotation existence statements and the
action-rotation diagram.

Statements are checked at finite depth: a verdict either exhibits an orbit
from the atlas that satisfies the instantiated inequality, or reports that
none was found at the searched depth.  Nothing here claims a refutation.
"""
from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from .action import ActionField, calabi, flux
from .hull import contains, convex_hull
from .mapdef import detect_boundary_rotations

DEFAULT_TOL = 1e-6
DEFAULT_A = (0.0, 0.2, 0.5, 1.0, 2.0, 5.0, math.inf)

WITNESS = "witness_found"
NO_WITNESS = "no_witness_at_depth"
NOT_MET = "hypothesis_not_met"


@dataclass(frozen=True)
class MeasurePoint:
    rho: float
    action: float
    kind: str  # orbit | center | lebesgue | birkhoff
    orbit: object = field(default=None, repr=False, compare=False)
    sample: object = field(default=None, repr=False, compare=False)
    weight: Optional[float] = None

    def row(self):
        o = self.orbit
        return {"rho": self.rho, "action": self.action, "kind": self.kind,
                "k": getattr(o, "k", ""), "m": getattr(o, "m", ""),
                "continuum": getattr(o, "continuum", "")}


@dataclass
class TheoremVerdict:
    name: str
    hypothesis: str
    hypothesis_values: dict
    conclusion_checked: str
    status: str
    witness: object = None
    slack: Optional[float] = None
    tol: float = DEFAULT_TOL
    notes: list = field(default_factory=list)

    def to_dict(self):
        w = self.witness
        return {
            "name": self.name, "hypothesis": self.hypothesis,
            "hypothesis_values": self.hypothesis_values,
            "conclusion_checked": self.conclusion_checked, "status": self.status,
            "witness": None if w is None else {"k": w.k, "m": w.m, "rho": float(w.rho),
                                               "mean_action": w.mean_action,
                                               "point": list(map(float, w.points[0]))},
            "slack": self.slack, "tol": self.tol, "notes": list(self.notes),
        }


def orbit_points(atlas):
    return [MeasurePoint(float(o.rho), o.mean_action, "orbit", orbit=o) for o in atlas]


@dataclass(frozen=True)
class Invariants:
    theta0: float
    theta1: float
    F: float
    Cal: float
    g_lower: float

    def as_dict(self):
        return {"theta0": self.theta0, "theta1": self.theta1, "F": self.F, "Cal": self.Cal}


def compute_invariants(map_, field_=None, cal_tol=None):
    br = detect_boundary_rotations(map_)
    fld = field_ or ActionField(map_)
    return Invariants(br.theta_lower, br.theta_upper, flux(map_).flux, calabi(fld, cal_tol),
                      fld.boundary_values[0])


def _pick(atlas, slack_fn, prefer=None):
    """Witness with the smallest nonnegative slack; ``prefer`` ranks first."""
    best = None
    for o in atlas:
        s = slack_fn(o)
        if s is None or s < 0:
            continue
        key = (0 if prefer is None or prefer(o) else 1, s)
        if best is None or key < best[0]:
            best = (key, o, s)
    return (None, None) if best is None else (best[1], best[2])


# ---------------------------------------------------------------------------

def check_sandwich(map_, field_, atlas, tol=DEFAULT_TOL, cal=None):
    """inf of orbit actions <= Cal <= sup of orbit actions."""
    cal = calabi(field_) if cal is None else cal
    vals = {"Cal": cal}
    concl = "min A(orbit) <= Cal + tol and Cal <= max A(orbit) + tol"
    if not len(atlas):
        return TheoremVerdict("sandwich", "always", vals, concl, NO_WITNESS, tol=tol,
                              notes=[f"empty atlas at depth k_max={getattr(atlas, 'k_max', '?')}"])
    lo = min(atlas, key=lambda o: o.mean_action)
    hi = max(atlas, key=lambda o: o.mean_action)
    vals.update(min_action=lo.mean_action, max_action=hi.mean_action)
    ok = lo.mean_action <= cal + tol and cal <= hi.mean_action + tol
    slack = min(cal + tol - lo.mean_action, hi.mean_action + tol - cal)
    notes = [f"min attained at k={lo.k} m={lo.m}; max attained at k={hi.k} m={hi.m}"]
    return TheoremVerdict("sandwich", "always", vals, concl, WITNESS if ok else NO_WITNESS,
                          witness=lo, slack=slack, tol=tol, notes=notes)


def a_line(inv, a, rho):
    """Right side of the a-family inequality at rotation number ``rho``."""
    if math.isinf(a):
        raise ValueError("use the limiting statement for a = inf")
    return (inv.Cal + a * (2 * inv.F - inv.theta0)) / (1 + a) + a * (inv.theta0 - rho)


def a_hypothesis(inv, a, tol=DEFAULT_TOL):
    """Sign of Cal - ((1 - a) F + a theta0): +1, -1 or 0 (within tol)."""
    if math.isinf(a):
        d = inv.F - inv.theta0
        if abs(d) <= tol:
            d = inv.Cal - inv.F
    else:
        d = inv.Cal - ((1 - a) * inv.F + a * inv.theta0)
    return 0 if abs(d) <= tol else (1 if d > 0 else -1)


def check_a_family(inv, atlas, a_values=DEFAULT_A, tol=DEFAULT_TOL):
    """One verdict per a: orbit above (or below, mirrored case) the a-line."""
    out = []
    for a in a_values:
        side = a_hypothesis(inv, a, tol)
        name = f"a-family a={a:g}"
        if math.isinf(a):
            if abs(inv.F - inv.theta0) <= tol:
                hyp = "F = theta0 and Cal vs F"
            else:
                hyp = "theta0 < F" if inv.F > inv.theta0 else "F < theta0"
            if side == 0:
                out.append(TheoremVerdict(name, hyp, inv.as_dict(), "", NOT_MET, tol=tol))
                continue
            sign = side
            concl = ("rho >= theta0 - tol; if |rho - theta0| <= tol also A >= 2F - theta0 - tol"
                     if sign > 0 else
                     "rho <= theta0 + tol; if |rho - theta0| <= tol also A <= 2F - theta0 + tol")
            w, s = _pick(atlas, lambda o: _limit_slack(inv, o, sign, tol))
        else:
            hyp = "(1 - a) F + a theta0 " + ("< Cal" if side > 0 else "> Cal")
            if side == 0:
                out.append(TheoremVerdict(name, "(1 - a) F + a theta0 = Cal", inv.as_dict(), "",
                                          NOT_MET, tol=tol))
                continue
            concl = ("A >= " if side > 0 else "A <= ") + \
                "Cal/(1+a) + a(2F - theta0)/(1+a) + a(theta0 - rho)"
            w, s = _pick(atlas, lambda o: side * (o.mean_action - a_line(inv, a, float(o.rho))) + tol)
        vals = dict(inv.as_dict(), a=a)
        out.append(TheoremVerdict(name, hyp, vals, concl, WITNESS if w else NO_WITNESS,
                                  witness=w, slack=s, tol=tol))
    return out


def _limit_slack(inv, o, sign, tol):
    rho = float(o.rho)
    d = sign * (rho - inv.theta0) + tol
    if d < 0:
        return None
    if abs(rho - inv.theta0) <= tol:
        e = sign * (o.mean_action - (2 * inv.F - inv.theta0)) + tol
        return e if e >= 0 else None
    return d


def _valid_for_family(inv, o, a_values, tol):
    """True if ``o`` satisfies the a-line inequality for every a that fires."""
    for a in a_values:
        if math.isinf(a):
            continue
        side = a_hypothesis(inv, a, tol)
        if side and side * (o.mean_action - a_line(inv, a, float(o.rho))) + tol < 0:
            return False
    return True


def check_main_theorem(map_, field_, atlas, tol=DEFAULT_TOL, a_values=DEFAULT_A, inv=None):
    """The three bullet statements, their mirror images, and the a-family.

    Bullets use the strict hypotheses (beyond ``tol``).  When several orbits
    qualify, orbits that also satisfy every fired a-line are preferred and
    ties are broken by the smallest slack.
    """
    inv = inv or compute_invariants(map_, field_)
    vals = inv.as_dict()
    th0, F, cal = inv.theta0, inv.F, inv.Cal
    prefer = lambda o: _valid_for_family(inv, o, a_values, tol)  # noqa: E731
    out = []

    def verdict(name, hyp, fired, concl, slack_fn, notes=()):
        if not fired:
            out.append(TheoremVerdict(name, hyp, vals, concl, NOT_MET, tol=tol, notes=list(notes)))
            return
        w, s = _pick(atlas, slack_fn, prefer)
        out.append(TheoremVerdict(name, hyp, vals, concl, WITNESS if w else NO_WITNESS,
                                  witness=w, slack=s, tol=tol, notes=list(notes)))

    verdict("bullet 1", "F < Cal", cal - F > tol, "A(gamma) >= Cal - tol",
            lambda o: o.mean_action - cal + tol)
    b2 = 0.5 * (cal + F + th0)
    verdict("bullet 2", "theta0 < Cal", cal - th0 > tol,
            "A(gamma) >= (Cal + F + theta0)/2 - rho(gamma) - tol",
            lambda o: o.mean_action - (b2 - float(o.rho)) + tol,
            notes=["the statement names the witness gamma_1 but bounds it with rho(gamma_a); "
                   "both are read as the same orbit",
                   "the a = 1 line of the a-family gives (Cal + 2F + theta0)/2 - rho instead; "
                   "see the a-family verdict at a=1"])
    verdict("bullet 3", "theta0 <= F < Cal", th0 <= F + tol and cal - F > tol,
            "rho(gamma) >= theta0 - tol; if |rho - theta0| <= tol also A >= 2F - theta0 - tol",
            lambda o: _limit_slack(inv, o, 1, tol))
    # mirror images (inf side of the sandwich applied to the embedded maps)
    verdict("bullet 1 (mirror)", "F > Cal", F - cal > tol, "A(gamma) <= Cal + tol",
            lambda o: cal - o.mean_action + tol)
    verdict("bullet 2 (mirror)", "theta0 > Cal", th0 - cal > tol,
            "A(gamma) <= (Cal + 2F + theta0)/2 - rho(gamma) + tol",
            lambda o: 0.5 * (cal + 2 * F + th0) - float(o.rho) - o.mean_action + tol)
    verdict("bullet 3 (mirror)", "theta0 >= F > Cal", th0 + tol >= F and F - cal > tol,
            "rho(gamma) <= theta0 + tol; if |rho - theta0| <= tol also A <= 2F - theta0 + tol",
            lambda o: _limit_slack(inv, o, -1, tol))
    out.extend(check_a_family(inv, atlas, a_values, tol))
    return out


def check_conjecture(map_, field_, atlas, tol=DEFAULT_TOL, inv=None):
    """The annulus conjecture, under both readings of g on the inner circle.

    Reading "derived" uses the value of g computed on the inner boundary;
    reading "rotation" uses theta at that boundary.  Results are
    informational: the statement is unproved.
    """
    inv = inv or compute_invariants(map_, field_)
    out = []
    for reading, g_lo in (("derived", inv.g_lower), ("rotation", inv.theta0)):
        bound = max(inv.theta1, g_lo)
        vals = dict(inv.as_dict(), g_inner=g_lo, g_outer=inv.theta1)
        name = f"conjecture ({reading} reading)"
        notes = ["conjecture (unproved); finite-depth result is informational only"]
        if not inv.Cal < bound - tol:
            out.append(TheoremVerdict(name, "Cal < max(g_outer, g_inner)", vals,
                                      "min A(gamma) <= Cal", NOT_MET, tol=tol, notes=notes))
            continue
        w, s = _pick(atlas, lambda o: inv.Cal - o.mean_action + tol)
        out.append(TheoremVerdict(name, "Cal < max(g_outer, g_inner)", vals,
                                  "min A(gamma) <= Cal + tol", WITNESS if w else NO_WITNESS,
                                  witness=w, slack=s, tol=tol, notes=notes))
    return out


# ---------------------------------------------------------------------------
# disk side

def disk_measure_points(dm, atlas):
    """Images of annulus orbits under the embedding plus the disk center."""
    fld = ActionField(dm)
    pts = []
    for o in atlas:
        p = np.asarray(o.points, dtype=float)
        u = (p[:, 0] - getattr(dm.base, "offset", 0.0)) / dm.scale
        r, y = dm.params.to_disk(u, p[:, 1])
        act = float(np.mean(fld.values(np.column_stack([r, y]))))
        pts.append(MeasurePoint(float(o.rho), act, "orbit", orbit=o))
    center = float(fld.values([[0.0, 0.0]])[0])
    pts.append(MeasurePoint(dm.hole_rotation, center, "center"))
    return pts


def _disk_verdict(pts, cal, th, vals, tol):
    if abs(cal - th) <= tol:
        return TheoremVerdict("disk", "Cal != boundary rotation", vals, "", NOT_MET, tol=tol)
    if cal < th:
        side, concl = "inf", "A <= Cal + tol"
        slack = lambda p: cal + tol - p.action  # noqa: E731
    else:
        side, concl = "sup", "A >= Cal - tol"
        slack = lambda p: p.action - cal + tol  # noqa: E731
    hyp = f"Cal {'<' if side == 'inf' else '>'} boundary rotation"
    cands = [(slack(p), i) for i, p in enumerate(pts) if p.kind == "orbit" and slack(p) >= 0]
    notes = [f"{side} side fired"]
    if not cands:
        return TheoremVerdict("disk", hyp, vals, concl, NO_WITNESS, tol=tol, notes=notes)
    s, i = min(cands)
    return TheoremVerdict("disk", hyp, dict(vals, witness_action=pts[i].action), concl,
                          WITNESS, witness=pts[i].orbit, slack=s, tol=tol, notes=notes)


def check_hutchings_disk(dm, atlas, tol=DEFAULT_TOL, cal=None):
    """Disk statement for f_a: Cal(f_a) < boundary rotation gives an orbit with
    action <= Cal(f_a).

    With Cal(f_a) above the boundary rotation the sup side of the sandwich
    is checked instead; the verdict notes which side fired.
    """
    th = dm.base_rotations.theta_upper
    cal = calabi(ActionField(dm)) if cal is None else cal
    vals = {"a": dm.params.a, "Cal": cal, "boundary_rotation": th}
    return _disk_verdict(disk_measure_points(dm, atlas), cal, th, vals, tol)


def check_disk_map(map_, field_, atlas, tol=DEFAULT_TOL, cal=None):
    """The same disk statement for a map given directly on the disk chart."""
    th = detect_boundary_rotations(map_).theta_upper
    cal = calabi(field_) if cal is None else cal
    return _disk_verdict(orbit_points(atlas), cal, th, {"Cal": cal, "boundary_rotation": th},
                         tol)


def recheck(verdict, inv):
    """Re-evaluate a witness from raw numbers (soundness check)."""
    w = verdict.witness
    if verdict.status != WITNESS or w is None:
        return True
    A, rho, t = w.mean_action, float(w.rho), verdict.tol
    n = verdict.name
    if n == "bullet 1":
        return A >= inv.Cal - t
    if n == "bullet 2":
        return A >= 0.5 * (inv.Cal + inv.F + inv.theta0) - rho - t
    if n == "bullet 3":
        return rho >= inv.theta0 - t and (abs(rho - inv.theta0) > t or A >= 2 * inv.F - inv.theta0 - t)
    if n == "bullet 1 (mirror)":
        return A <= inv.Cal + t
    if n == "bullet 2 (mirror)":
        return A <= 0.5 * (inv.Cal + 2 * inv.F + inv.theta0) - rho + t
    if n == "bullet 3 (mirror)":
        return rho <= inv.theta0 + t and (abs(rho - inv.theta0) > t or A <= 2 * inv.F - inv.theta0 + t)
    if n.startswith("a-family"):
        a = verdict.hypothesis_values["a"]
        side = a_hypothesis(inv, a, t)
        if math.isinf(a):
            return _limit_slack(inv, w, side, t) is not None
        return side * (A - a_line(inv, a, rho)) + t >= 0
    if n == "sandwich":
        return verdict.hypothesis_values["min_action"] <= inv.Cal + t <= \
            verdict.hypothesis_values["max_action"] + 2 * t
    return True


# ---------------------------------------------------------------------------

@dataclass
class Diagram:
    points: list
    hull: list
    theta0: Optional[float]
    lebesgue: Optional[MeasurePoint]
    a_lines: list
    overlap: list

    @property
    def rho_range(self):
        r = [p.rho for p in self.points]
        return (min(r), max(r)) if r else (math.nan, math.nan)

    @property
    def action_range(self):
        v = [p.action for p in self.points]
        return (min(v), max(v)) if v else (math.nan, math.nan)


def build_diagram(orbit_pts, lebesgue=None, birkhoff_samples=(), inv=None,
                  a_values=DEFAULT_A, tol=DEFAULT_TOL):
    """Measure points, their hull, the line rho = theta0 and the a-lines.

    Each a-line is ``A = intercept + slope * rho`` with slope -a, passing
    through ``(theta0, (Cal + a(2F - theta0))/(1 + a))``; a = inf is the
    vertical line through ``(theta0, 2F - theta0)``.
    """
    pts = list(orbit_pts)
    if lebesgue is not None:
        pts.append(lebesgue)
    pts += [MeasurePoint(s.rho_estimate, s.action_average, "birkhoff", sample=s)
            for s in birkhoff_samples]
    if not pts:
        raise ValueError("diagram needs at least one point")
    hull = convex_hull([(p.rho, p.action) for p in pts])
    lines, overlap = [], []
    theta0 = None
    if inv is not None:
        theta0 = inv.theta0
        for a in a_values:
            if math.isinf(a):
                lines.append({"a": a, "slope": -math.inf, "at_theta0": 2 * inv.F - inv.theta0})
            else:
                at = (inv.Cal + a * (2 * inv.F - inv.theta0)) / (1 + a)
                lines.append({"a": a, "slope": -a, "intercept": at + a * inv.theta0,
                              "at_theta0": at})
        floor = max(inv.Cal, 2 * inv.F - inv.theta0)
        overlap = [p for p in orbit_pts
                   if p.action >= floor - tol and p.rho <= inv.theta0 + tol]
    return Diagram(pts, hull, theta0, lebesgue, lines, overlap)


def hull_contains_all(diagram, eps=1e-12):
    return all(contains(diagram.hull, (p.rho, p.action), eps) for p in diagram.points)


def diagram_for(map_, atlas, birkhoff_samples=(), a_values=DEFAULT_A, inv=None):
    """Convenience wrapper: Lebesgue point from flux and Calabi invariant."""
    inv = inv or compute_invariants(map_)
    leb = MeasurePoint(inv.F / map_.chart.area, inv.Cal, "lebesgue")
    return build_diagram(orbit_points(atlas), leb, birkhoff_samples, inv, a_values)
