"""Planar convex hull (Andrew's monotone chain)."""
import numpy as np


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Counterclockwise hull vertices, collinear points dropped.

    Degenerate inputs give one vertex (all points equal) or the two
    endpoints (all points collinear).
    """
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        return [tuple(p) for p in pts]

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return hull


def contains(hull, p, eps=1e-12):
    """True if p is inside or on a counterclockwise hull (signed-area test)."""
    if len(hull) == 1:
        return np.hypot(p[0] - hull[0][0], p[1] - hull[0][1]) <= eps
    if len(hull) == 2:
        a, b = hull
        if abs(_cross(a, b, p)) > eps * max(1.0, np.hypot(b[0] - a[0], b[1] - a[1])):
            return False
        t = np.dot(np.subtract(p, a), np.subtract(b, a))
        return -eps <= t <= np.dot(np.subtract(b, a), np.subtract(b, a)) + eps
    return all(_cross(hull[i], hull[(i + 1) % len(hull)], p) >= -eps for i in range(len(hull)))
