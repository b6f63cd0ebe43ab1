"""Periodic orbits, rotation numbers and Birkhoff averages.

Orbits are found on the universal cover as zeros of
``G(p) = f~^k(p) - p - (0, m)`` by Newton's method from a grid of seeds.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from .action import ActionField
from .mapdef import detect_boundary_rotations, matmul2
from .surface import LinearSegment, circle_delta, line_integrals

MAX_NEWTON = 50
STEP_TOL = 1e-12
RESIDUAL_TOL = 1e-9
DEDUP_TOL = 1e-6
DEGENERATE_TOL = 1e-6
MAX_HALVINGS = 10


@dataclass(frozen=True)
class PeriodicOrbit:
    points: np.ndarray = field(repr=False)
    k: int
    m: int
    mean_action: float
    residual: float
    continuum: bool = False

    @property
    def rho(self):
        return Fraction(self.m, self.k)

    def to_dict(self):
        return {"k": self.k, "m": self.m, "rho": float(self.rho),
                "mean_action": self.mean_action, "residual": self.residual,
                "continuum": self.continuum, "points": self.points.tolist()}


def rotation_number(orbit):
    """m/k as an exact fraction."""
    return Fraction(orbit.m, orbit.k)


class Atlas(list):
    """List of orbits plus search metadata."""

    def __init__(self, orbits=(), k_max=0, grid=0, dropped=0):
        super().__init__(orbits)
        self.k_max = k_max
        self.grid = grid
        self.dropped = dropped


# ---------------------------------------------------------------------------

def iterate(map_, x, y, k):
    """k-th iterate of the lift: (X, total y-displacement)."""
    D = np.zeros(np.shape(x))
    for _ in range(k):
        x, d = map_.lift(x, y + D)
        D = D + d
    return x, D


def iterate_jacobian(map_, x, y, k):
    D = np.zeros(np.shape(x))
    J = np.broadcast_to(np.eye(2), np.shape(x) + (2, 2)).copy()
    for _ in range(k):
        x, d, Ji = map_.lift_jacobian(x, y + D)
        D = D + d
        J = matmul2(Ji, J)
    return x, D, J


def _newton(map_, k, m, x, y, chart):
    """Damped Newton with pseudo-inverse steps; returns (x, y, converged)."""
    x = x.astype(float).copy()
    y = y.astype(float).copy()
    m = np.asarray(m, dtype=float)
    converged = np.zeros(x.shape, dtype=bool)
    active = np.arange(x.size)
    for _ in range(MAX_NEWTON):
        if active.size == 0:
            break
        xa, ya, ma = x[active], y[active], m[active]
        X, D, J = iterate_jacobian(map_, xa, ya, k)
        G = np.stack([X - xa, D - ma], axis=-1)
        JG = J - np.eye(2)
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(JG, rcond=1e-10), G)
        norm0 = np.hypot(G[:, 0], G[:, 1])
        # full steps first; the rest try all halvings in one batched call
        lam = np.ones(active.size)
        xt = np.clip(xa + step[:, 0], chart.x_min, chart.x_max)
        Xt, Dt = iterate(map_, xt, ya + step[:, 1], k)
        todo = np.nonzero(np.hypot(Xt - xt, Dt - ma) > norm0)[0]
        if todo.size:
            lams = 0.5 ** np.arange(1, MAX_HALVINGS + 1)
            ti, tl = np.repeat(todo, lams.size), np.tile(lams, todo.size)
            xt = np.clip(xa[ti] + tl * step[ti, 0], chart.x_min, chart.x_max)
            yt = ya[ti] + tl * step[ti, 1]
            Xt, Dt = iterate(map_, xt, yt, k)
            better = (np.hypot(Xt - xt, Dt - ma[ti]) <= norm0[ti]).reshape(todo.size, lams.size)
            ok = better.any(axis=1)
            lam[todo] = np.where(ok, lams[np.argmax(better, axis=1)], lams[-1])
            todo = todo[~ok]
        # no decrease along the damped step: the seed is stuck, give it up
        stuck = np.zeros(active.size, dtype=bool)
        stuck[todo] = True
        stuck &= norm0 > RESIDUAL_TOL
        xn = np.clip(xa + lam * step[:, 0], chart.x_min, chart.x_max)
        yn = ya + lam * step[:, 1]
        moved = np.hypot(xn - xa, yn - ya)
        x[active], y[active] = xn, yn
        done = (moved < STEP_TOL) & ~stuck
        converged[active[done]] = True
        active = active[~(done | stuck)]
    return x, y, converged


def _orbit_points(map_, x, y, k):
    pts = np.empty((k, 2))
    D = 0.0
    xi = np.array([x])
    for i in range(k):
        pts[i] = xi[0], (y + D) % 1.0
        xi, d = map_.lift(xi, np.array([y + D]))
        D += d[0]
    return pts


def _circle_dist(p, q):
    return np.hypot(p[..., 0] - q[..., 0], circle_delta(p[..., 1] - q[..., 1]))


def _primitive(map_, x, y, k):
    """Smallest k' with f^k'(p) = p on the annulus, with its winding."""
    pts = _orbit_points(map_, x, y, k)
    for kp in range(1, k):
        if k % kp == 0 and _circle_dist(pts[kp], pts[0]) < RESIDUAL_TOL:
            _, D = iterate(map_, np.array([x]), np.array([y]), kp)
            return kp, int(round(D[0])), pts[:kp]
    return k, None, pts


def _canonical(pts):
    i = min(range(len(pts)), key=lambda j: (pts[j, 0], pts[j, 1]))
    return np.roll(pts, -i, axis=0)


def _certify(map_, pts, k, m):
    X, D = iterate(map_, pts[:1, 0], pts[:1, 1], k)
    return max(abs(X[0] - pts[0, 0]), abs(D[0] - m))


def _solve_block(map_, k, m_lo, m_hi, sx, sy):
    """Newton from one block of seeds; returns raw (k, m, x, y) candidates."""
    chart = map_.chart
    X0, D0 = iterate(map_, sx, sy, k)
    cand_m, cand_i = [], []
    for mm in (np.floor(D0), np.ceil(D0)):
        ok = (mm >= m_lo) & (mm <= m_hi)
        cand_m.append(mm[ok])
        cand_i.append(np.nonzero(ok)[0])
    m = np.concatenate(cand_m)
    idx = np.concatenate(cand_i)
    first = np.unique(np.stack([idx, m]), axis=1)
    idx, m = first[0].astype(int), first[1]
    if idx.size == 0:
        return [], 0
    x, y, conv = _newton(map_, k, m, sx[idx], sy[idx], chart)
    out = []
    dropped = int(np.count_nonzero(~conv))
    X, D = iterate(map_, x[conv], y[conv], k)
    res = np.maximum(np.abs(X - x[conv]), np.abs(D - m[conv]))
    dropped += int(np.count_nonzero(res >= RESIDUAL_TOL))
    for xi, yi, mi in zip(x[conv][res < RESIDUAL_TOL], y[conv][res < RESIDUAL_TOL],
                          m[conv][res < RESIDUAL_TOL]):
        out.append((k, int(mi), float(xi), float(yi % 1.0)))
    return out, dropped


def _degenerate(map_, p, k):
    _, _, J = iterate_jacobian(map_, p[:1], p[1:], k)
    return np.linalg.svd(J[0] - np.eye(2), compute_uv=False)[-1] < DEGENERATE_TOL


def _components(points, owner, radius, span):
    """Connected components (by orbit owner) of a point cloud, periodic in y."""
    data = np.column_stack([points[:, 0] - points[:, 0].min(), points[:, 1] % 1.0])
    tree = cKDTree(data, boxsize=[span * 4 + 1.0, 1.0])
    parent = list(range(int(owner.max()) + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in tree.query_pairs(radius):
        a, b = find(owner[i]), find(owner[j])
        if a != b:
            parent[max(a, b)] = min(a, b)
    return [find(i) for i in range(len(parent))]


def find_periodic_orbits(map_, k_max=12, m_range=None, grid=64, field=None, workers=1):
    """Periodic orbits up to period ``k_max``.

    Parameters
    ----------
    map_ : MapDefinition
    k_max : int
        Largest period searched.
    m_range : (int, int), optional
        Winding numbers to consider; intersected with the range allowed by
        the boundary rotation numbers.
    grid : int
        Seeds form a grid x grid lattice.
    field : ActionField, optional
        Used for mean actions; defaults to the standard normalization.
    workers : int
        Seed blocks are solved in a thread pool; the result does not depend
        on the number of workers.

    Returns
    -------
    Atlas
        Orbits sorted by (k, m, x, y).  Orbits of one (k, m) whose points
        link up into a connected family are reported once with
        ``continuum=True``.
    """
    if k_max < 1 or grid < 8:
        raise ValueError("need k_max >= 1 and grid >= 8")
    chart = map_.chart
    br = detect_boundary_rotations(map_)
    field = field or ActionField(map_)
    span = chart.x_max - chart.x_min
    u = (np.arange(grid) + 0.5) / grid
    SX, SY = np.meshgrid(chart.x_min + span * u, u, indexing="ij")
    SX, SY = SX.ravel(), SY.ravel()
    blocks = np.array_split(np.arange(SX.size), max(1, workers))

    jobs = []
    for k in range(1, k_max + 1):
        lo = math.ceil(k * min(br.thetas) - 1 - 1e-9)
        hi = math.floor(k * max(br.thetas) + 1 + 1e-9)
        if m_range is not None:
            lo, hi = max(lo, m_range[0]), min(hi, m_range[1])
        if lo <= hi:
            jobs += [(k, lo, hi, b) for b in blocks if b.size]

    def run(job):
        k, lo, hi, b = job
        return _solve_block(map_, k, lo, hi, SX[b], SY[b])

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    raw = sorted(c for r, _ in results for c in r)
    dropped = sum(d for _, d in results)

    # primitive periods, then dedup within each (k, m)
    groups = {}
    for k, m, x, y in raw:
        kp, mp, pts = _primitive(map_, x, y, k)
        mp = m if mp is None else mp
        groups.setdefault((kp, mp), []).append(_canonical(pts))
    orbits = []
    spacing = span / grid
    for (k, m) in sorted(groups):
        distinct = []
        for pts in sorted(groups[(k, m)], key=lambda p: (p[0, 0], p[0, 1])):
            if not any(np.min(_circle_dist(pts[:, None, :], q[None, :, :])) < DEDUP_TOL
                       for q in distinct):
                distinct.append(pts)
        comp = list(range(len(distinct)))
        # only degenerate orbits (Df^k - I singular) can belong to a family
        degen = [i for i in range(len(distinct)) if _degenerate(map_, distinct[i][0], k)]
        if len(degen) > 1:
            cloud = np.concatenate([distinct[i] for i in degen])
            owner = np.repeat(np.arange(len(degen)), k)
            sub = _components(cloud, owner, 2.0 * spacing, span)
            for i, r in zip(degen, sub):
                comp[i] = degen[r]
        for root in sorted(set(comp)):
            members = [i for i, c in enumerate(comp) if c == root]
            pts = distinct[members[0]]
            orbits.append((k, m, pts, len(members) > 1))

    vals = field.values(np.concatenate([o[2] for o in orbits])) if orbits else []
    out, pos = [], 0
    for k, m, pts, cont in orbits:
        g = vals[pos:pos + k]
        pos += k
        out.append(PeriodicOrbit(pts, k, m, float(np.mean(g)), _certify(map_, pts, k, m), cont))
    out.sort(key=lambda o: (o.k, o.m, o.points[0, 0], o.points[0, 1]))
    return Atlas(out, k_max, grid, dropped)


def random_periodic_orbits(map_, n, seed=0, k_max=4, field=None, max_rounds=20):
    """``n`` periodic orbits (not deduplicated) from random seeds and periods."""
    rng = np.random.default_rng(seed)
    chart = map_.chart
    br = detect_boundary_rotations(map_)
    field = field or ActionField(map_)
    found = []
    for _ in range(max_rounds):
        k = int(rng.integers(1, k_max + 1))
        sx = rng.uniform(chart.x_min, chart.x_max, 4 * n)
        sy = rng.uniform(0.0, 1.0, 4 * n)
        lo = math.ceil(k * min(br.thetas) - 1 - 1e-9)
        hi = math.floor(k * max(br.thetas) + 1 + 1e-9)
        cands, _ = _solve_block(map_, k, lo, hi, sx, sy)
        for kk, m, x, y in cands:
            kp, mp, pts = _primitive(map_, x, y, kk)
            found.append((kp, m if mp is None else mp, pts))
            if len(found) == n:
                break
        if len(found) == n:
            break
    out = []
    for k, m, pts in found:
        g = field.values(pts)
        out.append(PeriodicOrbit(pts, k, m, float(np.mean(g)), _certify(map_, pts, k, m)))
    return out


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BirkhoffSample:
    start: tuple
    N: int
    rho_estimate: float
    action_average: float
    tail_gap: float


def _mean(d):
    # exact for constant sequences
    return float(d[0] + math.fsum(d - d[0]) / d.size)


class ActionTable:
    """Bicubic spline of g on a tensor grid, checked against exact values.

    Grid values are accumulated radially from short segment integrals, so a
    table costs about one line integral per grid node.
    """

    def __init__(self, field, n=257, check=64, seed=0):
        chart = field.chart
        self.field = field
        xs = np.linspace(chart.x_min, chart.x_max, n)
        ys = np.linspace(0.0, 1.0, n)
        a = chart.x_max if field.normalization.anchor != "lower" else chart.x_min
        order = xs[::-1] if a == chart.x_max else xs
        segs = [LinearSegment((x0, y), (x1, y)) for y in ys for x0, x1 in zip(order, order[1:])]
        inc = line_integrals(segs, field.oneform, field.tol, chart, min_panels=1)
        base = field.values([[a, 0.0]])[0]
        cum = base + np.concatenate([np.zeros((n, 1)), np.cumsum(inc.reshape(n, n - 1), 1)], 1)
        G = cum[:, ::-1].T if a == chart.x_max else cum.T   # G[i, j] = g(xs[i], ys[j])
        self.spline = RectBivariateSpline(xs, ys, G, kx=3, ky=3, s=0)
        rng = np.random.default_rng(seed)
        pts = np.column_stack([rng.uniform(chart.x_min, chart.x_max, check),
                               rng.uniform(0, 1, check)])
        self.max_error = float(np.max(np.abs(self(pts) - field.values(pts))))

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        return self.spline.ev(pts[:, 0], pts[:, 1] % 1.0)


def birkhoff(map_, field, start, N, table=None):
    """Time averages of the y-displacement and of g along one orbit."""
    return birkhoff_many(map_, field, [start], N, table)[0]


def birkhoff_many(map_, field, starts, N, table=None):
    """Birkhoff samples for many starts, iterated together.

    ``table`` (an ActionTable) replaces exact line integrals for g when the
    number of samples is large.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    S = np.atleast_2d(np.asarray(starts, dtype=float))
    x, y = S[:, 0].copy(), S[:, 1].copy()
    disp = np.empty((N, len(S)))
    pts = np.empty((N, len(S), 2))
    for i in range(N):
        pts[i, :, 0], pts[i, :, 1] = x, y % 1.0
        x, d = map_.lift(x, y)
        y = y + d
        disp[i] = d
    flat = pts.reshape(-1, 2)
    g = (table(flat) if table is not None else field.values(flat)).reshape(N, len(S))
    out = []
    for j in range(len(S)):
        rho = _mean(disp[:, j])
        half = _mean(disp[: N // 2, j])
        out.append(BirkhoffSample((float(S[j, 0]), float(S[j, 1])), N, rho,
                                  _mean(g[:, j]), abs(rho - half)))
    return out
