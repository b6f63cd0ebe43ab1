"""Adaptive composite Gauss-Legendre rules, batched over many intervals/cells.

Every refinement level is evaluated with one vectorized call to the
integrand, so a user function sees arrays of nodes rather than scalars.
"""
from functools import lru_cache
import math

import numpy as np

from .errors import NonConvergence

DEFAULT_ORDER = 8


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_lobatto(n):
    """Nodes and weights on [0, 1] of the n-point rule that includes both ends."""
    P = np.polynomial.legendre.Legendre.basis(n - 1)
    t = np.concatenate([[-1.0], np.sort(P.deriv().roots().real), [1.0]])
    w = 2.0 / (n * (n - 1) * P(t) ** 2)
    return 0.5 * (t + 1.0), 0.5 * w


def _panel_sums(f, owner, a, b, order, rule=gauss_legendre):
    t, w = rule(order)
    h = (b - a)[:, None]
    nodes = a[:, None] + h * t[None, :]
    vals = f(nodes.ravel(), np.repeat(owner, order)).reshape(nodes.shape)
    return (vals * w[None, :]).sum(axis=1) * (b - a)


def adaptive_gauss(f, intervals, tol, order=DEFAULT_ORDER, min_panels=4,
                   max_panels=None):
    """Integrate ``f`` over a batch of intervals.

    Parameters
    ----------
    f : callable
        ``f(t, owner)`` with ``t`` a flat array of nodes and ``owner`` the
        index of the interval each node belongs to; returns values of the
        same shape.
    intervals : array_like, shape (n, 2)
        Integration limits, one row per integral.
    tol : float
        Absolute error target for every integral separately.
    min_panels : int
        Initial uniform panels per interval.
    max_panels : int, optional
        Work limit; defaults to 400000 or 64 panels per interval,
        whichever is larger.

    Returns
    -------
    ndarray, shape (n,)
    """
    iv = np.atleast_2d(np.asarray(intervals, dtype=float))
    n = iv.shape[0]
    total = np.zeros(n)
    if n == 0:
        return total
    if max_panels is None:
        max_panels = max(400_000, 64 * n)
    length = np.abs(iv[:, 1] - iv[:, 0])
    length = np.where(length > 0, length, 1.0)

    k = np.arange(min_panels + 1) / min_panels
    edges = iv[:, :1] + (iv[:, 1:] - iv[:, :1]) * k[None, :]
    owner = np.repeat(np.arange(n), min_panels)
    a = edges[:, :-1].ravel()
    b = edges[:, 1:].ravel()
    coarse = _panel_sums(f, owner, a, b, order)
    used = a.size

    while a.size:
        mid = 0.5 * (a + b)
        both = _panel_sums(f, np.concatenate([owner, owner]),
                           np.concatenate([a, mid]), np.concatenate([mid, b]), order)
        left, right = both[:a.size], both[a.size:]
        fine = left + right
        # Gauss nodes avoid the panel ends, so a kink close to an end is
        # invisible to both Gauss sums; the Lobatto rule samples the ends.
        check = _panel_sums(f, owner, a, b, order, gauss_lobatto)
        err = np.maximum(np.abs(fine - coarse), np.abs(fine - check))
        if not np.all(np.isfinite(err)):
            raise NonConvergence("integrand is not finite on the integration path")
        budget = tol * np.abs(b - a) / length[owner]
        tiny = np.abs(b - a) < 1e-13 * length[owner]
        done = (err <= budget) | tiny
        np.add.at(total, owner[done], fine[done])
        keep = ~done
        used += 3 * a.size
        if keep.any() and used > max_panels:
            raise NonConvergence(
                f"adaptive quadrature exceeded {max_panels} panels (tol={tol:g})")
        owner = np.concatenate([owner[keep], owner[keep]])
        a, b = np.concatenate([a[keep], mid[keep]]), np.concatenate([mid[keep], b[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    return total


def _cell_sums(f, x0, x1, y0, y1, order):
    t, w = gauss_legendre(order)
    hx = (x1 - x0)[:, None, None]
    hy = (y1 - y0)[:, None, None]
    X = x0[:, None, None] + hx * t[None, :, None]
    Y = y0[:, None, None] + hy * t[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    vals = f(X.ravel(), Y.ravel()).reshape(X.shape)
    ww = w[:, None] * w[None, :]
    return (vals * ww[None]).sum(axis=(1, 2)) * (x1 - x0) * (y1 - y0)


def _children(x0, x1, y0, y1):
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return (np.concatenate([x0, xm, x0, xm]), np.concatenate([xm, x1, xm, x1]),
            np.concatenate([y0, y0, ym, ym]), np.concatenate([ym, ym, y1, y1]))


def adaptive_gauss_2d(f, xbreaks, ybreaks, tol, order=DEFAULT_ORDER,
                      max_cells=400_000):
    """Integrate ``f(x, y)`` over a rectangle by quadtree refinement.

    The rectangle is the tensor product of the break lists; kinks of the
    integrand that are known in advance belong in the break lists.  Error
    control is global: each round splits the leaves carrying the larger half
    of the estimated error, until the total estimate is below ``tol``.
    Kinks along curves then cost O(tol^-1/2) cells rather than O(1/tol).
    """
    xb = np.asarray(xbreaks, dtype=float)
    yb = np.asarray(ybreaks, dtype=float)
    gx0, gy0 = np.meshgrid(xb[:-1], yb[:-1], indexing="ij")
    gx1, gy1 = np.meshgrid(xb[1:], yb[1:], indexing="ij")
    x0, x1, y0, y1 = gx0.ravel(), gx1.ravel(), gy0.ravel(), gy1.ravel()
    area = (xb[-1] - xb[0]) * (yb[-1] - yb[0])
    coarse = _cell_sums(f, x0, x1, y0, y1, order)
    cells = _children(x0, x1, y0, y1)
    kids = _cell_sums(f, *cells, order).reshape(4, -1)
    used = 5 * x0.size
    # a leaf is a cell whose four children are evaluated
    bounds = np.stack([x0, x1, y0, y1])
    while True:
        fine = kids.sum(axis=0)
        err = np.abs(fine - coarse)
        err[(bounds[1] - bounds[0]) * (bounds[3] - bounds[2]) < 1e-24 * area] = 0.0
        total_err = err.sum()
        if total_err <= tol:
            return math.fsum(fine)
        rank = np.argsort(err)[::-1]
        n_split = int(np.searchsorted(np.cumsum(err[rank]), 0.5 * total_err)) + 1
        split = np.zeros(err.size, dtype=bool)
        split[rank[:n_split]] = True
        if used + 16 * n_split > max_cells:
            raise NonConvergence(
                f"2D adaptive quadrature exceeded {max_cells} cells (tol={tol:g})")
        # children of split leaves become leaves; evaluate their children
        child = np.stack(_children(*bounds[:, split]))
        child_coarse = kids[:, split].ravel()
        grand = _cell_sums(f, *_children(*child), order).reshape(4, -1)
        used += 16 * n_split
        bounds = np.concatenate([bounds[:, ~split], child], axis=1)
        coarse = np.concatenate([coarse[~split], child_coarse])
        kids = np.concatenate([kids[:, ~split], grand], axis=1)
