"""Implicit midpoint integration of planar Hamiltonian flows.

The vector field is (x', y') = (-H_y, H_x), i.e. i_X (dx ^ dy) = -dH, so a
bump H >= 0 turns clockwise and lowers the action.  The map is advanced in
the universal cover: ``y`` is tracked as an unwrapped displacement and H is
read on the fundamental domain y in [0, 1).

The exact derivative of one step is the Cayley transform
``(I - A)^-1 (I + A)`` with ``A = (h/2) J Hess H(midpoint)``; its
determinant is 1 because ``J Hess H`` is trace-free.
"""
import numpy as np

from .errors import IntegratorFailure

NEWTON_TOL = 1e-12
MAX_NEWTON = 50


def matmul2(A, B):
    """Batched product of stacked 2x2 matrices."""
    C = np.empty(np.broadcast_shapes(A.shape, B.shape))
    C[..., 0, 0] = A[..., 0, 0] * B[..., 0, 0] + A[..., 0, 1] * B[..., 1, 0]
    C[..., 0, 1] = A[..., 0, 0] * B[..., 0, 1] + A[..., 0, 1] * B[..., 1, 1]
    C[..., 1, 0] = A[..., 1, 0] * B[..., 0, 0] + A[..., 1, 1] * B[..., 1, 0]
    C[..., 1, 1] = A[..., 1, 0] * B[..., 0, 1] + A[..., 1, 1] * B[..., 1, 1]
    return C


def _step_matrix(dt, hxx, hxy, hyy):
    # A = (dt/2) [[-Hxy, -Hyy], [Hxx, Hxy]]
    k = 0.5 * dt
    a11, a12, a21, a22 = -k * hxy, -k * hyy, k * hxx, k * hxy
    # (I - A) inverse times (I + A); det(I - A) = det(I + A)
    m11, m12, m21, m22 = 1 - a11, -a12, -a21, 1 - a22
    det = m11 * m22 - m12 * m21
    p11, p12, p21, p22 = 1 + a11, a12, a21, 1 + a22
    s = np.empty(hxx.shape + (2, 2))
    s[..., 0, 0] = (m22 * p11 - m12 * p21) / det
    s[..., 0, 1] = (m22 * p12 - m12 * p22) / det
    s[..., 1, 0] = (-m21 * p11 + m11 * p21) / det
    s[..., 1, 1] = (-m21 * p12 + m11 * p22) / det
    return s


def implicit_midpoint(H, x, y, T, h, jacobian=False, tol=NEWTON_TOL, max_iter=MAX_NEWTON):
    """Advance points by the time-T flow of ``H``.

    Parameters
    ----------
    H : expr.Function2D
        Hamiltonian in the variables (x, y).
    x, y : ndarray
        Start points (y unwrapped).
    T : float
        Flow time; the number of steps is ``round(|T|/h)`` (at least 1).
    h : float
        Nominal step.
    jacobian : bool
        Also propagate the derivative of the discrete map.

    Returns
    -------
    X, D[, J]
        End x, y-displacement, and optionally the stacked 2x2 derivative.
    """
    x = np.array(x, dtype=float, copy=True).ravel()
    y = np.asarray(y, dtype=float).ravel()
    X = x.copy()
    D = np.zeros_like(x)
    J = np.broadcast_to(np.eye(2), x.shape + (2, 2)).copy() if jacobian else None
    if T == 0.0 or x.size == 0:
        return (X, D, J) if jacobian else (X, D)
    # rest points with vanishing Hessian are fixed by every step with J = I,
    # so they are skipped (exactly the same result, much cheaper for bumps)
    gx, gy, gxx, gxy, gyy = H.grad_hess(x, y % 1.0)
    moving = (gx != 0) | (gy != 0) | (gxx != 0) | (gxy != 0) | (gyy != 0)
    if not moving.all():
        out = implicit_midpoint(H, x[moving], y[moving], T, h, jacobian, tol, max_iter)
        X[moving], D[moving] = out[0], out[1]
        if jacobian:
            J[moving] = out[2]
        return (X, D, J) if jacobian else (X, D)
    n = max(1, int(round(abs(T) / h)))
    dt = T / n
    for _ in range(n):
        hx, hy = H.grad(X, (y + D) % 1.0)
        X1 = X - dt * hy
        D1 = D + dt * hx
        idx = np.arange(x.size)
        for _it in range(max_iter):
            mx = 0.5 * (X[idx] + X1[idx])
            my = (y[idx] + 0.5 * (D[idx] + D1[idx])) % 1.0
            gx, gy, gxx, gxy, gyy = H.grad_hess(mx, my)
            r1 = X1[idx] - X[idx] + dt * gy
            r2 = D1[idx] - D[idx] - dt * gx
            k = 0.5 * dt
            a11, a12, a21, a22 = 1 + k * gxy, k * gyy, -k * gxx, 1 - k * gxy
            det = a11 * a22 - a12 * a21
            dx = -(a22 * r1 - a12 * r2) / det
            dd = -(-a21 * r1 + a11 * r2) / det
            X1[idx] += dx
            D1[idx] += dd
            idx = idx[np.maximum(np.abs(dx), np.abs(dd)) >= tol]
            if idx.size == 0:
                break
        else:
            raise IntegratorFailure(
                f"implicit midpoint Newton did not converge for {idx.size} point(s) at step {dt:g}")
        if jacobian:
            mx = 0.5 * (X + X1)
            my = (y + 0.5 * (D + D1)) % 1.0
            _, _, gxx, gxy, gyy = H.grad_hess(mx, my)
            J = matmul2(_step_matrix(dt, gxx, gxy, gyy), J)
        X, D = X1, D1
    return (X, D, J) if jacobian else (X, D)
