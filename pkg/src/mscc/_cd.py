"""Compiled coordinate-descent kernels.

All kernels keep the residual ``r = D @ z - x`` current while sweeping, so a
coordinate gradient costs O(p) instead of a fresh sparse product.
"""
import numpy as np
from numba import njit

from .linalg import _shrink


@njit(cache=True)
def residual(D, x, z, active):
    r = -x.copy()
    p = D.shape[0]
    for k in range(active.shape[0]):
        j = active[k]
        v = z[j]
        for i in range(p):
            r[i] += D[i, j] * v
    return r


@njit(cache=True)
def coordinate_pass(D, r, z, coords, lam):
    """One cyclic pass of ``z_j <- shrink(z_j - D_j.r, lam)`` over ``coords``.

    Returns the largest absolute coordinate change.
    """
    p = D.shape[0]
    biggest = 0.0
    for k in range(coords.shape[0]):
        j = coords[k]
        g = 0.0
        for i in range(p):
            g += D[i, j] * r[i]
        old = z[j]
        new = _shrink(old - g, lam)
        delta = new - old
        if delta != 0.0:
            for i in range(p):
                r[i] += delta * D[i, j]
            z[j] = new
            if abs(delta) > biggest:
                biggest = abs(delta)
    return biggest


@njit(cache=True)
def ccd_update(D, x, z, lam, full_passes, support_passes):
    """Warm-started CCD on one sample; ``z`` is modified in place.

    Returns the support of the updated code.
    """
    l = D.shape[1]
    r = residual(D, x, z, np.flatnonzero(z))
    everything = np.arange(l)
    for _ in range(full_passes):
        coordinate_pass(D, r, z, everything, lam)
    support = np.flatnonzero(z)
    for _ in range(support_passes):
        coordinate_pass(D, r, z, support, lam)
    return np.flatnonzero(z)


@njit(cache=True)
def sgd_update(D, hdiag, x, z, active):
    """One preconditioned SGD step on the active atoms, then ball projection."""
    p = D.shape[0]
    for k in range(active.shape[0]):
        mu = active[k]
        hdiag[mu] += z[mu] * z[mu]
    R = residual(D, x, z, active)
    for k in range(active.shape[0]):
        mu = active[k]
        step = z[mu] / hdiag[mu]
        sq = 0.0
        for i in range(p):
            D[i, mu] -= step * R[i]
            sq += D[i, mu] * D[i, mu]
        if sq > 1.0:
            nrm = np.sqrt(sq)
            for i in range(p):
                D[i, mu] /= nrm


@njit(cache=True)
def task_epoch(D, hdiag, X, Z, order, lam, full_passes, support_passes):
    """Run the per-sample CCD + SGD update over the columns of ``X`` in ``order``."""
    for k in range(order.shape[0]):
        i = order[k]
        x = X[:, i]
        z = Z[:, i]
        active = ccd_update(D, x, z, lam, full_passes, support_passes)
        if active.shape[0] > 0:
            sgd_update(D, hdiag, x, z, active)


@njit(cache=True)
def ccd_solve(D, x, z, lam, tol, max_sweeps):
    """Full cyclic sweeps until the largest change drops below ``tol``.

    Returns the number of sweeps used, or -1 when ``max_sweeps`` ran out.
    """
    l = D.shape[1]
    r = residual(D, x, z, np.flatnonzero(z))
    everything = np.arange(l)
    for sweep in range(max_sweeps):
        if coordinate_pass(D, r, z, everything, lam) < tol:
            return sweep + 1
    return -1


@njit(cache=True)
def encode_columns(D, X, Z, lam, tol, max_sweeps, sweeps):
    for i in range(X.shape[1]):
        sweeps[i] = ccd_solve(D, X[:, i], Z[:, i], lam, tol, max_sweeps)


@njit(cache=True)
def lasso_cd(X, y, w, lam, tol, max_sweeps):
    """Coordinate descent for ``(1/2n)||y - Xw||^2 + lam ||w||_1``.

    ``w`` is updated in place; returns the sweep count (-1 if not converged).
    """
    n, d = X.shape
    colsq = np.zeros(d)
    for j in range(d):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        colsq[j] = s / n
    r = y - X @ w
    for sweep in range(max_sweeps):
        biggest = 0.0
        for j in range(d):
            if colsq[j] == 0.0:
                continue
            rho = 0.0
            for i in range(n):
                rho += X[i, j] * r[i]
            rho = rho / n + colsq[j] * w[j]
            new = _shrink(rho, lam) / colsq[j]
            delta = new - w[j]
            if delta != 0.0:
                for i in range(n):
                    r[i] -= delta * X[i, j]
                w[j] = new
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest < tol:
            return sweep + 1
    return -1
