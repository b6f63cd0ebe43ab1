"""Area-preserving maps of the annulus and disk as composition trees.

Maps are evaluated on the universal cover.  Every evaluator returns the
new radial coordinate together with the *displacement* of the angular
coordinate, ``lift(x, y) -> (X, D)`` with ``Y = y + D``; keeping D separate
makes rotation numbers of rigid pieces exact in floating point.

``compose(g, f)`` means g after f: the rightmost argument acts first.
Every leaf carries the isotopy obtained by scaling its parameter by t.
"""
from dataclasses import dataclass, field
from functools import cached_property
import hashlib
from typing import Optional, Union

import numpy as np

from . import expr as E
from .errors import (AreaPreservationError, NotRigidNearBoundary, ParseError,
                     ValidationError)
from .flow import implicit_midpoint, matmul2
from .surface import AnnulusChart, CoverPath, DiskChart, circle_delta

TWO_PI = 2.0 * np.pi
DEFAULT_FLOW_STEP = 1e-3
RIGID_TOL = 1e-9
RIGID_GRID = 32
MIN_BAND = 1e-3


# ---------------------------------------------------------------------------
# leaves (pure data; compiled against a chart by MapDefinition)

@dataclass(frozen=True)
class Identity:
    def to_text(self):
        return "identity()"


@dataclass(frozen=True)
class RigidRotation:
    c: float

    def to_text(self):
        return f"rotation({self.c!r})"


@dataclass(frozen=True)
class Twist:
    a1: float
    a0: float

    def to_text(self):
        return f"twist({self.a1!r}, {self.a0!r})"


@dataclass(frozen=True)
class DiskRotation:
    c: float

    def to_text(self):
        return f"disk_rotation({self.c!r})"


@dataclass(frozen=True)
class DiskTwist:
    """(r, theta) -> (r, theta + a1 r^2 + a0)."""
    a1: float
    a0: float

    def to_text(self):
        return f"disk_twist({self.a1!r}, {self.a0!r})"


@dataclass(frozen=True)
class HamiltonianFlow:
    H: E.Node
    T: float = 1.0
    h: float = DEFAULT_FLOW_STEP

    def to_text(self):
        return f"flow({E.to_text(self.H)}, {self.T!r}, {self.h!r})"


@dataclass(frozen=True)
class BumpTwist:
    """Rotate each circle of radius s about ``center`` by ``profile(s)`` turns.

    ``profile`` is an expression in ``r`` (distance to the center); the
    leaf is the identity for s >= radius.
    """
    center: tuple
    radius: float
    profile: E.Node

    def to_text(self):
        return (f"bump_twist(({self.center[0]!r}, {self.center[1]!r}), {self.radius!r}, "
                f"{E.to_text(self.profile)})")


@dataclass(frozen=True)
class Compose:
    parts: tuple

    def to_text(self):
        return f"compose({', '.join(p.to_text() for p in self.parts)})"


Leaf = Union[Identity, RigidRotation, Twist, DiskRotation, DiskTwist, HamiltonianFlow,
             BumpTwist, Compose]

ANNULUS_ONLY = (RigidRotation, Twist, HamiltonianFlow)
DISK_ONLY = (DiskRotation, DiskTwist)


def iter_leaves(node):
    if isinstance(node, Compose):
        for p in node.parts:
            yield from iter_leaves(p)
    else:
        yield node


# ---------------------------------------------------------------------------
# evaluators

def _eye(shape):
    J = np.zeros(shape + (2, 2))
    J[..., 0, 0] = 1.0
    J[..., 1, 1] = 1.0
    return J


class _Shear:
    """(x, y) -> (x, y + t * shift(x))."""

    exact_area = True

    def __init__(self, shift, dshift):
        self.shift = shift
        self.dshift = dshift

    def lift(self, x, y, t=1.0):
        x = np.asarray(x, dtype=float)
        return x.copy(), t * self.shift(x) + np.zeros(np.shape(y))

    def jac(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        J = _eye(x.shape)
        J[..., 1, 0] = self.dshift(x)
        return x.copy(), self.shift(x) + np.zeros_like(x), J


def _constant(c):
    return lambda x: np.full(np.shape(x), float(c))


class _Flow:
    exact_area = False

    def __init__(self, leaf):
        self.leaf = leaf
        self.H = E.Function2D(leaf.H, ("x", "y"))

    def lift(self, x, y, t=1.0):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        X, D = implicit_midpoint(self.H, x, y, t * self.leaf.T, self.leaf.h)
        return X.reshape(x.shape), D.reshape(x.shape)

    def jac(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        X, D, J = implicit_midpoint(self.H, x, y, self.leaf.T, self.leaf.h, jacobian=True)
        return X.reshape(x.shape), D.reshape(x.shape), J.reshape(x.shape + (2, 2))


class _Bump:
    exact_area = True

    def __init__(self, leaf, chart):
        self.leaf = leaf
        self.disk = chart.kind == "disk"
        self.w = E.Function1D(leaf.profile, "r")
        cx, cy = leaf.center
        if self.disk:
            self.c = np.array([cx * np.cos(TWO_PI * cy), cx * np.sin(TWO_PI * cy)])
        else:
            self.c = np.array([cx, cy])

    def _local(self, ux, uy, t, with_jac):
        """Rotate offsets (all inside the support) about the center."""
        s = np.hypot(ux, uy)
        w, wp = self.w.value_and_derivative(s)
        phi = TWO_PI * t * w
        c, sn = np.cos(phi), np.sin(phi)
        vx = c * ux - sn * uy
        vy = sn * ux + c * uy
        if not with_jac:
            return vx, vy, None
        q = np.divide(TWO_PI * t * wp, s, out=np.zeros_like(s), where=s > 0)
        M = np.empty(s.shape + (2, 2))
        M[..., 0, 0] = c - q * vy * ux
        M[..., 0, 1] = -sn - q * vy * uy
        M[..., 1, 0] = sn + q * vx * ux
        M[..., 1, 1] = c + q * vx * uy
        return vx, vy, M

    def _eval(self, x, y, t, with_jac):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        X, D = x.copy(), np.zeros(x.shape)
        J = _eye(x.shape) if with_jac else None
        if self.disk:
            ang = TWO_PI * y
            cs, sn = np.cos(ang), np.sin(ang)
            ux, uy = x * cs - self.c[0], x * sn - self.c[1]
        else:
            ux, uy = x - self.c[0], circle_delta(y - self.c[1])
        inside = np.hypot(ux, uy) < self.leaf.radius
        if not inside.any():
            return X, D, J
        ux, uy = ux[inside], uy[inside]
        vx, vy, M = self._local(ux, uy, t, with_jac)
        if not self.disk:
            X[inside] = self.c[0] + vx
            D[inside] = vy - uy
            if with_jac:
                J[inside] = M
            return X, D, J
        qx, qy = self.c[0] + vx, self.c[1] + vy
        R = np.hypot(qx, qy)
        yi = y[inside]
        X[inside] = R
        D[inside] = circle_delta(np.arctan2(qy, qx) / TWO_PI - yi)
        if with_jac:
            # polar -> cartesian, the local map, cartesian -> polar
            xi, ci, si = x[inside], cs[inside], sn[inside]
            C = np.empty(xi.shape + (2, 2))
            C[..., 0, 0], C[..., 0, 1] = ci, -TWO_PI * xi * si
            C[..., 1, 0], C[..., 1, 1] = si, TWO_PI * xi * ci
            P = np.empty(xi.shape + (2, 2))
            P[..., 0, 0], P[..., 0, 1] = qx / R, qy / R
            P[..., 1, 0], P[..., 1, 1] = -qy / (TWO_PI * R**2), qx / (TWO_PI * R**2)
            J[inside] = matmul2(P, matmul2(M, C))
        return X, D, J

    def lift(self, x, y, t=1.0):
        X, D, _ = self._eval(x, y, t, False)
        return X, D

    def jac(self, x, y):
        return self._eval(x, y, 1.0, True)


class _Composite:
    def __init__(self, parts):
        self.parts = parts  # in order of application
        self.exact_area = all(p.exact_area for p in parts)

    def lift(self, x, y, t=1.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        D = np.zeros(np.broadcast(x, y).shape)
        for p in self.parts:
            x, d = p.lift(x, y + D, t)
            D = D + d
        return x, D

    def jac(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        D = np.zeros_like(x)
        J = _eye(x.shape)
        for p in self.parts:
            x, d, Jp = p.jac(x, y + D)
            D = D + d
            J = matmul2(Jp, J)
        return x, D, J


def _compile(node, chart):
    if isinstance(node, Compose):
        flat = []
        for p in reversed(node.parts):
            sub = _compile(p, chart)
            flat.extend(sub.parts if isinstance(sub, _Composite) else [sub])
        return _Composite(flat)
    if isinstance(node, Identity):
        return _Shear(_constant(0.0), _constant(0.0))
    if isinstance(node, (RigidRotation, DiskRotation)):
        return _Shear(_constant(node.c), _constant(0.0))
    if isinstance(node, Twist):
        a1, a0 = node.a1, node.a0
        return _Shear(lambda x: a1 * x + a0, _constant(a1))
    if isinstance(node, DiskTwist):
        a1, a0 = node.a1, node.a0
        return _Shear(lambda r: a1 * r * r + a0, lambda r: 2.0 * a1 * r)
    if isinstance(node, HamiltonianFlow):
        return _Flow(node)
    if isinstance(node, BumpTwist):
        return _Bump(node, chart)
    raise TypeError(node)


# ---------------------------------------------------------------------------

def area_density(chart, x):
    x = np.asarray(x, dtype=float)
    return 2.0 * x if chart.kind == "disk" else np.ones_like(x)


class LiftedMap:
    """Operations shared by every object exposing ``chart``, ``lift`` and
    ``lift_jacobian``."""

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        X, D = self.lift(p[..., 0], p[..., 1])
        return np.stack([X, (p[..., 1] + D) % 1.0], axis=-1)

    def area_jacobian(self, x, y):
        """det Df scaled by the chart's area density; 1 for area-preserving maps."""
        X, _, J = self.lift_jacobian(x, y)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if self.chart.kind == "disk":
            x = np.asarray(x, dtype=float)
            return det * np.divide(X, x, out=np.ones_like(det), where=x > 0)
        return det

    def isotopy_path(self, p, n=64):
        """Polyline through f~^t(p), t = 0, 1/n, ..., 1 (canonical isotopy)."""
        t = np.linspace(0.0, 1.0, n + 1)
        pts = [np.array([p[0], p[1]], dtype=float)]
        for ti in t[1:]:
            X, D = self.lift(np.array([p[0]]), np.array([p[1]]), ti)
            pts.append(np.array([X[0], p[1] + D[0]]))
        return CoverPath.polyline(pts)


@dataclass(frozen=True)
class MapDefinition(LiftedMap):
    """An area-preserving map: composition tree plus chart."""
    ast: Leaf
    chart: Union[AnnulusChart, DiskChart] = field(default_factory=AnnulusChart)

    def __post_init__(self):
        validate_tree(self.ast, self.chart)

    @cached_property
    def _ev(self):
        return _compile(self.ast, self.chart)

    @property
    def exact_area(self):
        return self._ev.exact_area

    def lift(self, x, y, t=1.0):
        """Lift evaluation: returns (X, D) with f~(x, y) = (X, y + D)."""
        return self._ev.lift(x, y, t)

    def lift_jacobian(self, x, y):
        """(X, D, Df) with Df stacked as [..., 2, 2]."""
        return self._ev.jac(x, y)

    def to_text(self):
        return f"{self.ast.to_text()} on {self.chart.describe()}"

    @cached_property
    def hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def compose(*maps):
    """compose(g, f) = g after f; all maps must share a chart."""
    chart = maps[0].chart
    if any(m.chart != chart for m in maps):
        raise ValidationError("cannot compose maps on different charts")
    return MapDefinition(Compose(tuple(m.ast for m in maps)), chart)


def evaluate(map_, p):
    return map_(p)


def jacobian(map_, p):
    p = np.asarray(p, dtype=float)
    return map_.lift_jacobian(p[..., 0], p[..., 1])[2]


def _sample_points(chart, n=8, margin=0.0):
    u = (np.arange(n) + 0.5) / n
    xs = chart.x_min + margin + (chart.x_max - chart.x_min - 2 * margin) * u
    X, Y = np.meshgrid(xs, u + 0.137, indexing="ij")
    return X.ravel(), Y.ravel()


def validate_tree(node, chart):
    """Chart compatibility, parameter ranges, area-preservation spot check."""
    for leaf in iter_leaves(node):
        pos = getattr(leaf, "_pos", (None, None))
        if chart.kind == "annulus" and isinstance(leaf, DISK_ONLY):
            raise ValidationError(f"disk leaf {leaf.to_text()} in annulus chart", *pos)
        if chart.kind == "disk" and isinstance(leaf, ANNULUS_ONLY):
            raise ValidationError(f"annulus leaf {leaf.to_text()} in disk chart", *pos)
        if isinstance(leaf, HamiltonianFlow):
            if leaf.h <= 0:
                raise ValidationError("flow step must be positive", *pos)
            E.validate(leaf.H, ("x", "y"))
        if isinstance(leaf, BumpTwist):
            _validate_bump(leaf, chart, pos)
    if isinstance(node, Compose) and not node.parts:
        raise ValidationError("compose() needs at least one map")
    ev = _compile(node, chart)
    for leaf_ev in (ev.parts if isinstance(ev, _Composite) else [ev]):
        x, y = _sample_points(chart)
        X, _, J = leaf_ev.jac(x, y)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if chart.kind == "disk":
            det = det * X / x
        tol = RIGID_TOL if leaf_ev.exact_area else 1e-5
        if np.max(np.abs(det - 1.0)) > tol:
            raise AreaPreservationError(
                f"leaf fails the area check: max |det - 1| = {np.max(np.abs(det - 1.0)):.3g}")


def _validate_bump(leaf, chart, pos):
    R = leaf.radius
    if R <= 0:
        raise ValidationError("bump radius must be positive", *pos)
    cx, cy = leaf.center
    if chart.kind == "disk":
        if not (cx - R > 0 and cx + R < 1):
            raise ValidationError("bump support must avoid the disk center and boundary", *pos)
    elif not (cx - R > chart.x_min and cx + R < chart.x_max and R < 0.5):
        raise ValidationError("bump support must lie inside the annulus", *pos)
    w = E.Function1D(leaf.profile, "r")
    v, dv = w.value_and_derivative(np.array([R]))
    if abs(v[0]) > 1e-12 or abs(dv[0]) > 1e-9:
        raise ValidationError(f"bump profile must vanish to first order at r={R!r} "
                              f"(got {v[0]:.3g}, {dv[0]:.3g})", *pos)


# ---------------------------------------------------------------------------
# boundary analysis

@dataclass(frozen=True)
class BoundaryRotations:
    theta_lower: float
    theta_upper: float
    band_lower: float
    band_upper: float

    @property
    def thetas(self):
        return self.theta_lower, self.theta_upper


def _rigid(map_, xs, ys, theta, tol):
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Xn, D = map_.lift(X.ravel(), Y.ravel())
    return (np.max(np.abs(Xn - X.ravel())) < tol) and (np.max(np.abs(D - theta)) < tol)


def detect_boundary_rotations(map_, tol=RIGID_TOL):
    """Rotation numbers of the two boundary circles and widths of rigid bands.

    The boundary circles themselves must be rigidly rotated (else
    NotRigidNearBoundary).  A band is rigid when |f~(p) - (x, y + theta)| is
    below ``tol`` on a 32x32 grid; widths double from 1e-3 and 0.0 means
    no band of width 1e-3 passed.
    """
    chart = map_.chart
    ys = np.arange(RIGID_GRID) / RIGID_GRID
    span = chart.x_max - chart.x_min
    out = {}
    for side, xb, sgn in (("lower", chart.x_min, 1.0), ("upper", chart.x_max, -1.0)):
        Xb, Db = map_.lift(np.full_like(ys, xb), ys)
        theta = float(Db[0])
        if np.max(np.abs(Xb - xb)) > tol or np.max(np.abs(Db - theta)) > tol:
            raise NotRigidNearBoundary(
                f"{side} boundary circle x={xb!r} is not rigidly rotated "
                f"(max |dx|={np.max(np.abs(Xb - xb)):.3g}, spread of rotation="
                f"{np.ptp(Db):.3g})")
        band = 0.0
        w = MIN_BAND
        while w <= span / 2:
            xs = xb + sgn * w * np.arange(RIGID_GRID) / (RIGID_GRID - 1)
            if not _rigid(map_, xs, ys, theta, tol):
                break
            band = w
            w *= 2
        out[side] = (theta, band)
    return BoundaryRotations(out["lower"][0], out["upper"][0], out["lower"][1], out["upper"][1])


# ---------------------------------------------------------------------------
# parsing

LEAF_ARITY = {
    "identity": (0, 0), "rotation": (1, 1), "rigid_rotation": (1, 1), "twist": (2, 2),
    "disk_rotation": (1, 1), "disk_twist": (2, 2), "flow": (2, 3),
    "hamiltonian_flow": (2, 3), "bump_twist": (3, 3), "compose": (1, 64),
}


def _const(node):
    if isinstance(node, E.Tuple):
        raise ValidationError("expected a number, got a tuple", *node.pos)
    names = E.free_names(node) - E.CONSTANTS
    if names:
        bad = sorted(names)[0]
        raise ValidationError(f"parameter must be a constant; found identifier {bad!r}", *node.pos)
    E.validate(node, ())
    return E.constant_value(node)


def _build(node):
    if not isinstance(node, E.Call) or node.name not in LEAF_ARITY:
        name = node.name if isinstance(node, (E.Call, E.Var)) else E.to_text(node)
        raise ValidationError(f"unknown map {name!r} (expected one of "
                              f"{', '.join(sorted(LEAF_ARITY))})", *node.pos)
    lo, hi = LEAF_ARITY[node.name]
    n = len(node.args)
    if not lo <= n <= hi:
        want = str(lo) if lo == hi else f"{lo}-{hi}"
        raise ParseError(f"arity: {node.name} takes {want} argument(s), got {n}", *node.pos)
    a = node.args
    name = node.name
    if name == "identity":
        leaf = Identity()
    elif name in ("rotation", "rigid_rotation"):
        leaf = RigidRotation(_const(a[0]))
    elif name == "twist":
        leaf = Twist(_const(a[0]), _const(a[1]))
    elif name == "disk_rotation":
        leaf = DiskRotation(_const(a[0]))
    elif name == "disk_twist":
        leaf = DiskTwist(_const(a[0]), _const(a[1]))
    elif name in ("flow", "hamiltonian_flow"):
        E.validate(a[0], ("x", "y"))
        leaf = HamiltonianFlow(a[0], _const(a[1]), _const(a[2]) if n == 3 else DEFAULT_FLOW_STEP)
    elif name == "bump_twist":
        if not isinstance(a[0], E.Tuple) or len(a[0].items) != 2:
            raise ValidationError("bump_twist center must be a pair (x, y)", *a[0].pos)
        E.validate(a[2], ("r",))
        leaf = BumpTwist((_const(a[0].items[0]), _const(a[0].items[1])), _const(a[1]), a[2])
    else:
        leaf = Compose(tuple(_build(p) for p in a))
    object.__setattr__(leaf, "_pos", node.pos)
    return leaf


def _parse_chart(p):
    t = p.tok
    if p.accept("disk"):
        return DiskChart()
    if p.accept("annulus"):
        p.expect("[")
        lo = _const(p.expression())
        p.expect(",")
        hi = _const(p.expression())
        p.expect("]")
        try:
            return AnnulusChart(lo, hi)
        except ValidationError as exc:
            raise ValidationError(str(exc), t.line, t.col) from None
    raise p.error(f"unknown chart {t.text!r} (expected annulus[a,b] or disk)")


def parse_map_line(text, line=1, col=1, chart=None):
    """Parse ``map_expr [on chart]``."""
    p = E.Parser(E.tokenize(text, line, col))
    tree = p.expression()
    if p.accept("on"):
        chart = _parse_chart(p)
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after map expression")
    ast = _build(tree)
    if chart is None:
        leaves = list(iter_leaves(ast))
        chart = DiskChart() if any(isinstance(l, DISK_ONLY) for l in leaves) else AnnulusChart()
    return MapDefinition(ast, chart)


def parse_map_spec(source):
    """Parse either a one-line map (``twist(1, 0) on annulus[0,1]``) or a
    full spec file; returns the MapDefinition."""
    from .specfile import is_spec_file, load_spec
    if is_spec_file(source):
        return load_spec(source).map
    return parse_map_line(source.strip("\n"))


def serialize(map_):
    return map_.to_text()
