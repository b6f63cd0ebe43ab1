"""Action functions, Calabi invariant, flux and the identities relating them.

For a map f with lift f~ and a primitive beta of the area form the action
function is the g with ``dg = f*beta - beta``.  Increments of g are line
integrals of the closed 1-form ``f*beta - beta``; its coefficients are
computed pointwise from the Jacobian of the lift.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np

from . import expr as E
from .mapdef import detect_boundary_rotations
from .quadrature import adaptive_gauss_2d
from .surface import CoverPath, LinearSegment, PrimitiveForm, circle_delta, line_integrals

LINE_TOL = 1e-11
AREA_TOL = 1e-10
FLOW_AREA_TOL = 1e-6


def default_area_tol(map_):
    """Area quadrature tolerance: integrands of flow maps are only C0-smooth
    across bump edges and cost one integration per node, so they get a
    looser default."""
    while hasattr(map_, "base"):
        map_ = map_.base
    return AREA_TOL if getattr(map_, "exact_area", True) else FLOW_AREA_TOL


def pullback_difference(map_, form):
    """The 1-form ``f*beta - beta`` as a callable ``(x, y) -> (w_x, w_y)``."""
    def oneform(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        X, D, J = map_.lift_jacobian(x, y)
        bX, bY = form.components(X, y + D)
        bx, by = form.components(x, y)
        wx = bX * J[..., 0, 0] + bY * J[..., 1, 0] - bx
        wy = bX * J[..., 0, 1] + bY * J[..., 1, 1] - by
        return wx, wy
    return oneform


@dataclass(frozen=True)
class Normalization:
    """Where g is pinned: ``anchor`` is 'upper', 'lower' or a chart point.

    ``value=None`` on a boundary anchor means the rotation number there.
    """
    anchor: Union[str, tuple] = "upper"
    value: Optional[float] = None

    def describe(self):
        where = {"upper": "outer boundary", "lower": "inner boundary"}.get(
            self.anchor, None) if isinstance(self.anchor, str) else None
        if where is None:
            where = f"point ({self.anchor[0]!r}, {self.anchor[1]!r})"
        val = "boundary rotation number" if self.value is None else repr(self.value)
        return f"g = {val} on {where}"


class ActionField:
    """The action function of ``map_`` for the primitive ``form``.

    Parameters
    ----------
    map_ : MapDefinition or DiskMap
        Anything with ``chart``, ``lift`` and ``lift_jacobian``.
    form : PrimitiveForm, optional
        Defaults to the chart's standard primitive.
    normalization : Normalization, optional
        Defaults to g = theta_1 on the outer boundary.
    tol : float
        Absolute tolerance of each line integral.
    """

    def __init__(self, map_, form=None, normalization=None, tol=LINE_TOL):
        self.map = map_
        self.chart = map_.chart
        self.form = form or self.chart.default_form()
        self.normalization = normalization or Normalization()
        self.tol = tol
        self.oneform = pullback_difference(map_, self.form)

    @cached_property
    def boundary(self):
        br = getattr(self.map, "boundary_rotations", None)
        return br if br is not None else detect_boundary_rotations(self.map)

    @cached_property
    def _anchor(self):
        n = self.normalization
        if n.anchor in ("upper", "lower"):
            x = self.chart.x_max if n.anchor == "upper" else self.chart.x_min
            theta = self.boundary.theta_upper if n.anchor == "upper" else self.boundary.theta_lower
            return x, None, theta if n.value is None else float(n.value)
        x0, y0 = n.anchor
        return float(x0), float(y0), 0.0 if n.value is None else float(n.value)

    def paths_to(self, points):
        """Radial-then-angular segments from the anchor to each point."""
        xa, ya, _ = self._anchor
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        segs = []
        breaks = getattr(self.map, "xbreaks", None) or []
        for x, y in pts:
            y0 = y if ya is None else ya
            # split radial legs where the integrand has known kinks
            inner = sorted((b for b in breaks if min(xa, x) < b < max(xa, x)),
                           reverse=bool(x < xa))
            xs = [xa] + inner + [x]
            path = [LinearSegment((u, y0), (v, y0)) for u, v in zip(xs, xs[1:])]
            if ya is not None:
                # g is constant on a rigid boundary circle, so boundary anchors
                # start straight below p and need no angular leg
                path.append(LinearSegment((x, ya), (x, ya + circle_delta(y - ya))))
            segs.append(path)
        return segs

    def values(self, points):
        """g at many points (one batched quadrature)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        paths = self.paths_to(pts)
        flat = [s for p in paths for s in p]
        vals = line_integrals(flat, self.oneform, self.tol, self.chart)
        owner = np.repeat(np.arange(len(paths)), [len(p) for p in paths])
        out = np.zeros(len(paths))
        np.add.at(out, owner, vals)
        return self._anchor[2] + out

    def increment(self, path):
        """g(end) - g(start) along an arbitrary cover path."""
        return float(np.sum(line_integrals(path.segments, self.oneform,
                                           self.tol / max(1, len(path.segments)), self.chart)))

    @cached_property
    def boundary_values(self):
        """(g on the inner boundary circle, g on the outer one)."""
        v = self.values([[self.chart.x_min, 0.0], [self.chart.x_max, 0.0]])
        return float(v[0]), float(v[1])


def action_value(field, p):
    return float(field.values([p])[0])


def calabi(field, tol=None):
    """Mean of g against the area form.

    Integrates by parts in x so only the pointwise derivative ``g_x`` is
    needed inside the 2D quadrature::

        int g P' dx dy = [g P]_{x-}^{x+} - int P g_x dx dy
    """
    if tol is None:
        tol = default_area_tol(field.map)
    P = field.form.root.P
    chart = field.chart
    lo, hi = chart.x_min, chart.x_max
    g_lo, g_hi = field.boundary_values
    area = float(P(hi) - P(lo))
    xbreaks = getattr(field.map, "xbreaks", None) or [lo, hi]

    def integrand(x, y):
        return P(x) * field.oneform(x, y)[0]

    inner = adaptive_gauss_2d(integrand, xbreaks, [0.0, 1.0], tol * area)
    return float((g_hi * P(hi) - g_lo * P(lo) - inner) / area)


@dataclass(frozen=True)
class FluxReport:
    """Signed area between a radial arc and its image, with diagnostics."""
    flux: float
    path_used: CoverPath = field(repr=False)
    boundary_correction: float
    line_integral: float
    path_gap: float


def flux(map_, tol=LINE_TOL):
    """Flux of the lift, via the pulled-back standard primitive.

    Along a radial arc l from the inner to the outer boundary,
    ``F = P(x+) theta_1 - P(x-) theta_0 - int_l (f*beta - beta)``.  A second,
    bent arc is integrated as a consistency check (``path_gap``).
    """
    chart = map_.chart
    br = getattr(map_, "boundary_rotations", None) or detect_boundary_rotations(map_)
    form = chart.default_form()
    w = pullback_difference(map_, form)
    lo, hi = chart.x_min, chart.x_max
    mid = 0.5 * (lo + hi)
    straight = CoverPath([LinearSegment((lo, 0.0), (hi, 0.0))])
    bent = CoverPath.polyline([(lo, 0.31), (mid, 0.62), (hi, 0.17)])
    vals = line_integrals(straight.segments + bent.segments, w, tol / 2, chart)
    corr = float(form.P(hi) * br.theta_upper - form.P(lo) * br.theta_lower)
    li = float(vals[0])
    return FluxReport(corr - li, straight, corr, li, abs(li - float(np.sum(vals[1:]))))


def flux_by_displacement(map_, tol=1e-9):
    """Area integral of the y-displacement of the lift (pairing of the
    Lebesgue rotation vector with dy); equals the flux."""
    chart = map_.chart
    dens = chart.default_form().density
    return adaptive_gauss_2d(lambda x, y: map_.lift(x, y)[1] * dens(x),
                             getattr(map_, "xbreaks", None) or [chart.x_min, chart.x_max],
                             [0.0, 1.0], tol)


def mean_action_of_measure(field, measure):
    """g-average against an invariant measure.

    ``measure`` is ``"lebesgue"``, a periodic orbit (anything with
    ``points``) or a Birkhoff sample (anything with ``action_average``).
    """
    if isinstance(measure, str):
        if measure != "lebesgue":
            raise ValueError(f"unknown measure {measure!r}")
        return calabi(field)
    if hasattr(measure, "action_average"):
        return float(measure.action_average)
    pts = np.asarray(measure.points if hasattr(measure, "points") else measure, dtype=float)
    return float(np.mean(field.values(pts)))


def action_difference_check(map_, c, x0, orbits, tol=LINE_TOL):
    """Both sides of the identity relating mean actions for beta and beta + c dy.

    Returns a list of ``(lhs, rhs)``, one per orbit; both fields are pinned
    to 0 at ``x0`` and the constant is ``c`` times the y-displacement of x0
    along the canonical isotopy.
    """
    norm = Normalization(tuple(map(float, x0)), 0.0)
    base = map_.chart.default_form()
    g = ActionField(map_, base, norm, tol)
    gs = ActionField(map_, base.shifted(c), norm, tol)
    path = map_.isotopy_path(x0)
    const = c * (path.end[1] - path.start[1])
    out = []
    for orb in orbits:
        lhs = mean_action_of_measure(gs, orb) - mean_action_of_measure(g, orb)
        out.append((lhs, c * float(orb.rho) - const))
    return out


def composition_additivity_check(f1, f2, x0, tol=None):
    """(Cal of f2 after f1, Cal f1 + Cal f2) with g12(x0) = g1(x0) + g2(f1(x0))."""
    from .mapdef import compose
    g1, g2 = ActionField(f1), ActionField(f2)
    x0 = np.asarray(x0, dtype=float)
    X, D = f1.lift(x0[:1], x0[1:])
    anchor_value = action_value(g1, x0) + action_value(g2, (X[0], x0[1] + D[0]))
    g12 = ActionField(compose(f2, f1), normalization=Normalization(tuple(x0), anchor_value))
    return calabi(g12, tol), calabi(g1, tol) + calabi(g2, tol)


def exact_shift_check(field, S, n_orbits=20, seed=0, k_max=4):
    """Largest deviation of the shifted-minus-base mean action from a constant.

    Uses ``n_orbits`` periodic orbits found from random seeds; adding dS to
    the primitive changes g by ``S o f - S`` plus a constant, which sums to
    zero along any periodic orbit.
    """
    from .orbits import random_periodic_orbits
    if isinstance(S, str):
        S = E.parse_expression(S)
    shifted = ActionField(field.map, field.form.shifted(0.0, S), field.normalization, field.tol)
    orbs = random_periodic_orbits(field.map, n_orbits, seed=seed, k_max=k_max)
    diffs = [mean_action_of_measure(shifted, o) - mean_action_of_measure(field, o) for o in orbs]
    return float(max(abs(d - diffs[0]) for d in diffs)) if diffs else 0.0


def invariants(map_, tol=None):
    """theta0, theta1, flux, Calabi and g on both boundary circles."""
    br = detect_boundary_rotations(map_)
    fld = ActionField(map_)
    g_lo, g_hi = fld.boundary_values
    fr = flux(map_)
    return {
        "theta0": br.theta_lower,
        "theta1": br.theta_upper,
        "F": fr.flux,
        "Cal": calabi(fld, tol),
        "g_A0": g_lo,
        "g_A1": g_hi,
        "band_lower": br.band_lower,
        "band_upper": br.band_upper,
        "flux_path_gap": fr.path_gap,
        "normalization": fld.normalization.describe(),
        "form": fld.form.describe(),
        "chart": map_.chart.describe(),
    }
