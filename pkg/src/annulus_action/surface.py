"""Charts, primitive 1-forms and paths in the universal cover.

Both charts use coordinates ``(x, y)`` with ``x`` radial and ``y`` the
angle in full turns (y in R/Z).  A primitive form always has the shape

    beta = (P(x) + c) dy + dS

so ``d beta = P'(x) dx ^ dy`` and the chart's area density is ``P'(x)``.
On the annulus ``P(x) = x``; on the unit disk, in polar coordinates
``(r, theta)``, ``P(r) = r^2`` which gives ``omega_D = 2 r dr dtheta``.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar, Optional

import numpy as np

from . import expr as E
from .errors import AmbiguousLift, ChartViolation, ValidationError
from .quadrature import adaptive_gauss, adaptive_gauss_2d

DEFAULT_TOL = 1e-9
CHART_SLACK = 1e-12


@dataclass(frozen=True)
class AnnulusChart:
    x_min: float = 0.0
    x_max: float = 1.0
    kind: ClassVar[str] = "annulus"
    variables: ClassVar[tuple] = ("x", "y")

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError(f"annulus chart needs x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def area(self):
        return self.x_max - self.x_min

    def default_form(self):
        return PrimitiveForm("beta0")

    def describe(self):
        return f"annulus[{self.x_min!r}, {self.x_max!r}]"


@dataclass(frozen=True)
class DiskChart:
    """Unit disk in polar coordinates (r, theta), theta in turns."""
    kind: ClassVar[str] = "disk"
    variables: ClassVar[tuple] = ("r", "theta")
    x_min: ClassVar[float] = 0.0
    x_max: ClassVar[float] = 1.0
    area: ClassVar[float] = 1.0

    def default_form(self):
        return PrimitiveForm("betaD")

    def describe(self):
        return "disk"


def check_in_chart(chart, x):
    x = np.asarray(x)
    if x.size and (x.min() < chart.x_min - CHART_SLACK or x.max() > chart.x_max + CHART_SLACK):
        bad = x.min() if x.min() < chart.x_min - CHART_SLACK else x.max()
        raise ChartViolation(f"sample x={bad!r} outside {chart.describe()}")


@dataclass(frozen=True)
class PrimitiveForm:
    """A primitive of a (scaled) area form.

    kind is one of ``beta0`` (x dy), ``betaD`` (r^2 dtheta), ``beta_a``
    ((x dy + a dy)/(a + 1)) or ``shifted`` (``base`` + c dy + dS).
    """
    kind: str
    a: float = 0.0
    c: float = 0.0
    base: Optional["PrimitiveForm"] = None
    exact: Optional[E.Node] = None

    def __post_init__(self):
        if self.kind not in ("beta0", "betaD", "beta_a", "shifted"):
            raise ValidationError(f"unknown primitive form {self.kind!r}")
        if self.kind == "beta_a" and self.a < 0:
            raise ValidationError("beta_a needs a >= 0")
        if self.kind == "shifted" and (self.base is None or self.base.kind == "shifted"):
            raise ValidationError("shifted form needs a non-shifted base form")

    @classmethod
    def beta_a(cls, a):
        return cls("beta0") if a == 0 else cls("beta_a", a=float(a))

    def shifted(self, c=0.0, exact=None):
        """This form plus ``c dy + dS``; ``exact`` is S as text or a tree."""
        if isinstance(exact, str):
            exact = E.parse_expression(exact)
        root = self.base if self.kind == "shifted" else self
        c0 = self.c if self.kind == "shifted" else 0.0
        if self.kind == "shifted" and self.exact is not None and exact is not None:
            exact = E.Binary("+", self.exact, exact)
        elif exact is None and self.kind == "shifted":
            exact = self.exact
        return PrimitiveForm("shifted", c=c0 + float(c), base=root, exact=exact)

    @property
    def root(self):
        return self.base if self.kind == "shifted" else self

    @property
    def variables(self):
        return ("r", "theta") if self.root.kind == "betaD" else ("x", "y")

    def P(self, x):
        k = self.root.kind
        if k == "beta0":
            return np.asarray(x, dtype=float)
        if k == "betaD":
            return np.asarray(x, dtype=float) ** 2
        a = self.root.a
        return (np.asarray(x, dtype=float) + a) / (a + 1.0)

    def density(self, x):
        """P'(x): the area form this primitive integrates to."""
        k = self.root.kind
        x = np.asarray(x, dtype=float)
        if k == "beta0":
            return np.ones_like(x)
        if k == "betaD":
            return 2.0 * x
        return np.full_like(x, 1.0 / (self.root.a + 1.0))

    def radial(self, x):
        """Coefficient of dy without the exact part."""
        return self.P(x) + (self.c if self.kind == "shifted" else 0.0)

    @cached_property
    def _exact_fn(self):
        if self.kind != "shifted" or self.exact is None:
            return None
        fn = E.Function2D(self.exact, self.variables)
        xs = np.linspace(0.0, 1.0, 17)
        lo, hi = fn(xs, 0.0), fn(xs, 1.0)
        glo, ghi = fn.grad(xs, 0.0), fn.grad(xs, 1.0)
        if (np.max(np.abs(lo - hi)) > 1e-12
                or max(np.max(np.abs(g0 - g1)) for g0, g1 in zip(glo, ghi)) > 1e-10):
            raise ValidationError(f"exact part S={E.to_text(self.exact)} is not 1-periodic in "
                                  f"{self.variables[1]}")
        return fn

    def exact_value(self, x, y):
        fn = self._exact_fn
        return np.zeros(np.broadcast(x, y).shape) if fn is None else fn(x, y)

    def components(self, x, y):
        """(b_x, b_y) with beta = b_x dx + b_y dy."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        by = self.radial(x)
        fn = self._exact_fn
        if fn is None:
            return np.zeros_like(x), by
        sx, sy = fn.grad(x, y)
        return sx, by + sy

    def describe(self):
        if self.kind == "beta0":
            return "x dy"
        if self.kind == "betaD":
            return "r^2 dtheta"
        if self.kind == "beta_a":
            return f"(x dy + {self.a!r} dy)/({self.a!r} + 1)"
        s = self.base.describe()
        if self.c:
            s += f" + {self.c!r} dy"
        if self.exact is not None:
            s += f" + d({E.to_text(self.exact)})"
        return s


class LinearSegment:
    """Straight segment in the universal cover, parametrized on [0, 1]."""

    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)

    @property
    def start(self):
        return self.p0

    @property
    def end(self):
        return self.p1

    def sample(self, t):
        t = np.asarray(t, dtype=float)
        d = self.p1 - self.p0
        return (self.p0[0] + t * d[0], self.p0[1] + t * d[1],
                np.full_like(t, d[0]), np.full_like(t, d[1]))


class CurveSegment:
    """Segment given by ``func(t) -> (x, y)`` and ``deriv(t) -> (x', y')``."""

    def __init__(self, func, deriv):
        self.func = func
        self.deriv = deriv

    @property
    def start(self):
        return np.array(self.func(np.array(0.0)), dtype=float)

    @property
    def end(self):
        return np.array(self.func(np.array(1.0)), dtype=float)

    def sample(self, t):
        x, y = self.func(t)
        dx, dy = self.deriv(t)
        return x, y, dx, dy


class CoverPath:
    """An ordered chain of segments in [x_min, x_max] x R."""

    def __init__(self, segments):
        self.segments = list(segments)
        for s0, s1 in zip(self.segments, self.segments[1:]):
            if np.max(np.abs(s0.end - s1.start)) > 1e-12:
                raise ValueError(f"segments do not join: {s0.end} -> {s1.start}")

    @classmethod
    def polyline(cls, points):
        pts = [np.asarray(p, dtype=float) for p in points]
        return cls([LinearSegment(a, b) for a, b in zip(pts, pts[1:])])

    @property
    def start(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    def reversed(self):
        segs = []
        for s in reversed(self.segments):
            if isinstance(s, LinearSegment):
                segs.append(LinearSegment(s.p1, s.p0))
            else:
                f, d = s.func, s.deriv
                segs.append(CurveSegment(lambda t, f=f: f(1.0 - np.asarray(t)),
                                         lambda t, d=d: tuple(-v for v in d(1.0 - np.asarray(t)))))
        return CoverPath(segs)

    def __add__(self, other):
        return CoverPath(self.segments + other.segments)


def line_integrals(segments, oneform, tol, chart=None, min_panels=4):
    """Integrate ``oneform(x, y) -> (b_x, b_y)`` along each segment.

    Returns one value per segment.  Linear segments are evaluated in a
    single vectorized batch.
    """
    segs = list(segments)
    if not segs:
        return np.zeros(0)
    linear = all(isinstance(s, LinearSegment) for s in segs)
    if linear:
        P0 = np.array([s.p0 for s in segs])
        D = np.array([s.p1 - s.p0 for s in segs])

    def integrand(t, owner):
        if linear:
            x = P0[owner, 0] + t * D[owner, 0]
            y = P0[owner, 1] + t * D[owner, 1]
            dx, dy = D[owner, 0], D[owner, 1]
        else:
            x, y, dx, dy = (np.empty_like(t) for _ in range(4))
            for k in np.unique(owner):
                m = owner == k
                x[m], y[m], dx[m], dy[m] = segs[k].sample(t[m])
        if chart is not None:
            check_in_chart(chart, x)
        bx, by = oneform(x, y)
        return bx * dx + by * dy

    return adaptive_gauss(integrand, np.tile([0.0, 1.0], (len(segs), 1)), tol,
                          min_panels=min_panels)


def integrate_form_along(path, form, tol=DEFAULT_TOL, chart=None):
    """Integral of a primitive form along a cover path."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    vals = line_integrals(path.segments, form.components, tol / max(len(path.segments), 1), chart)
    return float(np.sum(vals))


def circle_delta(dy):
    """Signed representative of dy in [-1/2, 1/2)."""
    return (np.asarray(dy, dtype=float) + 0.5) % 1.0 - 0.5


def lift_unwrap(points):
    """Lift a sequence of annulus points to the cover with continuous y.

    The first point is placed in y in [0, 1); each later point is the
    nearest lift to its predecessor.
    """
    pts = np.array(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return pts
    steps = circle_delta(np.diff(pts[:, 1]))
    dist = np.abs(steps)
    if np.any(dist >= 0.5 - 1e-15):
        i = int(np.argmax(dist >= 0.5 - 1e-15))
        raise AmbiguousLift(f"points {i} and {i + 1} are half a turn apart")
    out = pts.copy()
    out[0, 1] = pts[0, 1] % 1.0
    out[1:, 1] = out[0, 1] + np.cumsum(steps)
    return out


def chart_area_by_quadrature(chart, form=None, tol=1e-12):
    """Integral of the area form over the whole chart (a quadrature self-check)."""
    form = form or chart.default_form()
    return adaptive_gauss_2d(lambda x, y: form.density(x),
                             [chart.x_min, chart.x_max], [0.0, 1.0], tol)
