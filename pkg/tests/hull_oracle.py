"""O(n^3) convex hull oracle: an ordered pair (p, q) is a hull edge when every
other point lies strictly left of pq or on the closed segment pq."""
import numpy as np


def brute_hull_vertices(points):
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return set(pts)
    verts = set()
    for p in pts:
        for q in pts:
            if p == q:
                continue
            ok = True
            for r in pts:
                if r in (p, q):
                    continue
                c = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
                if c < 0:
                    ok = False
                    break
                if c == 0:
                    t = (r[0] - p[0]) * (q[0] - p[0]) + (r[1] - p[1]) * (q[1] - p[1])
                    if t < 0 or t > (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2:
                        ok = False
                        break
            if ok:
                verts.update((p, q))
    return verts
