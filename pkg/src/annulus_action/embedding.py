"""Embedding the annulus into the disk and pushing maps forward.

``i_a(x, y) = (sqrt((x + a)/(a + 1)), y)`` sends the annulus [0,1] x R/Z
onto the band ``r >= sqrt(a/(a+1))`` of the unit disk (polar coordinates,
angle in turns) and pulls ``r^2 dtheta`` back to ``(x dy + a dy)/(a + 1)``.
The pushed map is extended to the hole by rigid rotation by theta_0.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache
import warnings

import numpy as np
import sympy

from .action import ActionField, calabi, flux
from .mapdef import BoundaryRotations, LiftedMap, detect_boundary_rotations
from .surface import AnnulusChart, DiskChart


@dataclass(frozen=True)
class EmbeddingParams:
    a: float

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"embedding parameter must be >= 0, got {self.a!r}")

    @property
    def inner_radius(self):
        return float(np.sqrt(self.a / (self.a + 1.0)))

    @property
    def band_area(self):
        return 1.0 / (self.a + 1.0)

    @property
    def hole_area(self):
        return self.a / (self.a + 1.0)

    def to_disk(self, x, y):
        return np.sqrt((np.asarray(x, dtype=float) + self.a) / (self.a + 1.0)), y

    def to_annulus(self, r, y):
        return (self.a + 1.0) * np.asarray(r, dtype=float) ** 2 - self.a, y


class RenormalizedMap(LiftedMap):
    """Conjugate of an annulus map on [x0, x0 + L] to one on [0, 1]."""

    chart = AnnulusChart()

    def __init__(self, base):
        self.base = base
        self.offset = base.chart.x_min
        self.scale = base.chart.x_max - base.chart.x_min

    def lift(self, u, y, t=1.0):
        X, D = self.base.lift(self.offset + self.scale * np.asarray(u, dtype=float), y, t)
        return (X - self.offset) / self.scale, D

    def lift_jacobian(self, u, y):
        X, D, J = self.base.lift_jacobian(self.offset + self.scale * np.asarray(u, dtype=float), y)
        J = J.copy()
        J[..., 0, 1] /= self.scale
        J[..., 1, 0] *= self.scale
        return (X - self.offset) / self.scale, D, J

    def to_text(self):
        return f"renormalized({self.base.to_text()})"


def unit_chart_map(map_):
    """(map on [0, 1], scale) -- identity operation for maps already on [0, 1]."""
    if map_.chart.kind != "annulus":
        raise ValueError("embedding needs an annulus map")
    if map_.chart.x_min == 0.0 and map_.chart.x_max == 1.0:
        return map_, 1.0
    r = RenormalizedMap(map_)
    return r, r.scale


class DiskMap(LiftedMap):
    """The disk map f_a in polar coordinates (r, theta)."""

    chart = DiskChart()

    def __init__(self, base, params, hole_rotation, base_rotations, scale=1.0):
        self.base = base
        self.params = params
        self.hole_rotation = float(hole_rotation)
        self.base_rotations = base_rotations
        self.scale = scale
        self.r_in = params.inner_radius

    @property
    def xbreaks(self):
        return [0.0, self.r_in, 1.0] if self.r_in > 0 else [0.0, 1.0]

    @cached_property
    def boundary_rotations(self):
        br = self.base_rotations
        return BoundaryRotations(br.theta_lower, br.theta_upper, self.r_in, 0.0)

    def lift(self, r, y, t=1.0):
        r, y = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(y, dtype=float))
        a = self.params.a
        band = r >= self.r_in
        R = r.copy()
        D = np.full(r.shape, t * self.hole_rotation)
        if band.any():
            X, Db = self.base.lift((a + 1.0) * r[band] ** 2 - a, y[band], t)
            R[band] = np.sqrt(np.maximum(X + a, 0.0) / (a + 1.0))
            D[band] = Db
        return R, D

    def lift_jacobian(self, r, y):
        r, y = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(y, dtype=float))
        a = self.params.a
        band = r >= self.r_in
        R = r.copy()
        D = np.full(r.shape, self.hole_rotation)
        J = np.broadcast_to(np.eye(2), r.shape + (2, 2)).copy()
        if band.any():
            rb = r[band]
            X, Db, Jf = self.base.lift_jacobian((a + 1.0) * rb**2 - a, y[band])
            Rb = np.sqrt(np.maximum(X + a, 0.0) / (a + 1.0))
            dx_dr = 2.0 * (a + 1.0) * rb
            dR_dX = np.divide(1.0, 2.0 * (a + 1.0) * Rb, out=np.zeros_like(Rb), where=Rb > 0)
            Jb = Jf.copy()
            Jb[..., 0, 0] *= dR_dX * dx_dr
            Jb[..., 0, 1] *= dR_dX
            Jb[..., 1, 0] *= dx_dr
            # the center (a = 0 only): dR/dr tends to sqrt(dX/dx), dR/dtheta to 0
            c = Rb == 0
            Jb[c, 0, 0] = np.sqrt(Jf[c, 0, 0])
            R[band], D[band], J[band] = Rb, Db, Jb
        return R, D, J

    def to_text(self):
        return f"embed({self.base.to_text()}, a={self.params.a!r})"


def embed(map_, a):
    """Push an annulus map into the disk with parameter ``a``.

    Warns (rather than refusing) when no rigid band of positive width was
    detected at the inner boundary; the extension is then only continuous.
    """
    base, scale = unit_chart_map(map_)
    br = detect_boundary_rotations(base)
    if a > 0 and br.band_lower == 0.0:
        warnings.warn("no rigid band at the inner boundary: the extension to the hole is "
                      "continuous but may not be smooth", RuntimeWarning, stacklevel=2)
    return DiskMap(base, EmbeddingParams(float(a)), br.theta_lower, br, scale)


def annulus_invariants(dm, tol=None):
    """(F, Cal, theta_0) of the base map on [0, 1]."""
    return _base_invariants(dm.base, tol)


@lru_cache(maxsize=64)
def _base_invariants(base, tol):
    br = detect_boundary_rotations(base)
    return flux(base).flux, calabi(ActionField(base), tol), br.theta_lower


def center_action(dm):
    """g_a at the disk center: (line integral on the disk, closed form)."""
    a = dm.params.a
    F, _, th0 = annulus_invariants(dm)
    direct = float(ActionField(dm).values([[0.0, 0.0]])[0])
    return direct, (F + a * th0) / (1.0 + a)


def calabi_of_fa(dm, tol=None):
    """Calabi invariant of f_a: (disk quadrature, closed form)."""
    a = dm.params.a
    F, cal, th0 = annulus_invariants(dm, tol)
    direct = calabi(ActionField(dm), tol)
    return direct, (cal + 2 * a * F + a * a * th0) / (1.0 + a) ** 2


def orbit_action_transform(dm, orbit):
    """Mean action of the image orbit: (g_a averaged on the disk, closed form).

    ``orbit`` lives on the original chart.  On other charts than [0, 1] its
    mean action is recomputed for the renormalized map before use.
    """
    a = dm.params.a
    pts = np.asarray(orbit.points, dtype=float)
    u = (pts[:, 0] - getattr(dm.base, "offset", 0.0)) / dm.scale
    mean_action = orbit.mean_action
    if dm.scale != 1.0 or getattr(dm.base, "offset", 0.0) != 0.0:
        mean_action = float(np.mean(ActionField(dm.base).values(np.column_stack([u, pts[:, 1]]))))
    r, y = dm.params.to_disk(u, pts[:, 1])
    disk_side = float(np.mean(ActionField(dm).values(np.column_stack([r, y]))))
    return disk_side, (mean_action + a * float(orbit.rho)) / (1.0 + a)


_a = sympy.Symbol("a", positive=True)
_F, _C, _T, _A, _R = sympy.symbols("F Cal theta0 A rho", real=True)
LIMIT_FORMULAS = {
    "center_action": (_F + _a * _T) / (1 + _a),
    "calabi": (_C + 2 * _a * _F + _a**2 * _T) / (1 + _a) ** 2,
    "orbit_action": (_A + _a * _R) / (1 + _a),
}


def large_a_limits(F, cal, theta0, orbits=(), a_big=1e3):
    """Closed forms at a = a_big next to their symbolic limits a -> infinity."""
    subs = {_F: F, _C: cal, _T: theta0}
    rows = []
    for name in ("center_action", "calabi"):
        e = LIMIT_FORMULAS[name]
        rows.append({"quantity": name,
                     "at_a_big": float(e.subs(subs).subs(_a, a_big)),
                     "limit": float(sympy.limit(e, _a, sympy.oo).subs(subs))})
    e = LIMIT_FORMULAS["orbit_action"]
    lim = sympy.limit(e, _a, sympy.oo)
    for o in orbits:
        s = {_A: o.mean_action, _R: float(o.rho)}
        rows.append({"quantity": f"orbit k={o.k} m={o.m}",
                     "at_a_big": float(e.subs(s).subs(_a, a_big)),
                     "limit": float(lim.subs(s))})
    return rows


def embedding_report(map_, a_values, orbits=(), tol=None):
    """Per-a (direct, formula) pairs for the three transformation identities."""
    out = []
    for a in a_values:
        dm = embed(map_, a)
        ca = center_action(dm)
        cal = calabi_of_fa(dm, tol)
        rows = [{"k": o.k, "m": o.m, "direct": d, "formula": f, "gap": abs(d - f)}
                for o in orbits for d, f in [orbit_action_transform(dm, o)]]
        out.append({
            "a": float(a),
            "inner_radius": dm.params.inner_radius,
            "scale": dm.scale,
            "band_lower": dm.base_rotations.band_lower,
            "center_action": {"direct": ca[0], "formula": ca[1], "gap": abs(ca[0] - ca[1])},
            "calabi": {"direct": cal[0], "formula": cal[1], "gap": abs(cal[0] - cal[1])},
            "orbits": rows,
        })
    return out
