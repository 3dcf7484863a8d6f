"""Dense/sparse primitives shared by every solver in the package.

Feature matrices are plain ``float64`` arrays of shape ``(p, n)`` with one
sample per column, stored column-major so that a sample is contiguous.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


def as_feature_matrix(X, name="X"):
    """Validate ``X`` and return it as a Fortran-ordered float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.asfortranarray(X)


@njit(cache=True)
def _shrink(x, phi):
    if x > phi:
        return x - phi
    if x < -phi:
        return x + phi
    return 0.0


def soft_threshold(x, phi):
    """Soft thresholding ``sign(x) * max(|x| - phi, 0)``.

    Works elementwise on arrays as well as on scalars.
    """
    if np.any(np.asarray(phi) < 0):
        raise ValueError("threshold must be nonnegative")
    if np.ndim(x) == 0:
        return float(_shrink(float(x), float(phi)))
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - phi, 0.0)


@dataclass(frozen=True)
class SparseCode:
    """A sparse vector with an explicit, strictly increasing support.

    ``indices`` are 0-based positions; every stored value is nonzero.
    """

    length: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if self.length < 1:
            raise ValueError("length must be positive")
        if idx.ndim != 1 or val.shape != idx.shape:
            raise ValueError("indices and values must be 1-D of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.length or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing within [0, length)")
            if np.any(val == 0.0):
                raise ValueError("stored values must be nonzero")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 1:
            raise ValueError("dense code must be 1-D")
        idx = np.flatnonzero(z)
        return cls(z.size, idx, z[idx])

    @classmethod
    def zeros(cls, length):
        return cls(length, np.empty(0, np.int64), np.empty(0))

    def to_dense(self):
        z = np.zeros(self.length)
        z[self.indices] = self.values
        return z

    @property
    def nnz(self):
        return int(self.indices.size)


@njit(cache=True)
def _sparse_mul(A, indices, values, out):
    p = A.shape[0]
    for k in range(indices.shape[0]):
        j = indices[k]
        v = values[k]
        for i in range(p):
            out[i] += A[i, j] * v
    return out


def sparse_mul(A, b):
    """Return ``A @ b`` touching only the columns in ``b``'s support.

    Parameters
    ----------
    A : ndarray, shape (p, l)
    b : SparseCode of length l

    Returns
    -------
    ndarray, shape (p,)
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != b.length:
        raise ValueError(f"shape mismatch: A is {A.shape}, code length is {b.length}")
    return _sparse_mul(A, b.indices, b.values, np.zeros(A.shape[0]))
