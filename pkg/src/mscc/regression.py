"""Lasso / Ridge regression on standardized designs with k-fold CV.

Both fits minimize a loss scaled by ``1/(2n)`` on a design whose columns are
centred and scaled to unit population variance, so one regularization grid
serves any sample size.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _cd

logger = logging.getLogger(__name__)

METHODS = ("lasso", "ridge")
DEFAULT_GRID = tuple(np.logspace(-3, 3, 13))


@dataclass
class RegressionModel:
    """Fitted linear model.

    ``coef`` lives in the standardized space; ``weights``/``intercept`` apply
    to raw inputs.  Columns with zero variance get weight 0.
    """

    weights: np.ndarray
    intercept: float
    coef: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    lam: float
    method: str = "lasso"
    constant_target: bool = False
    n_sweeps: int = 0

    @property
    def n_features(self):
        return self.weights.size

    def to_dict(self):
        return {
            "method": self.method, "lambda": self.lam, "intercept": self.intercept,
            "weights": self.weights.tolist(), "coef": self.coef.tolist(),
            "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean, "constant_target": self.constant_target,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], float), float(d["intercept"]),
                   np.asarray(d["coef"], float), np.asarray(d["x_mean"], float),
                   np.asarray(d["x_scale"], float), float(d["y_mean"]),
                   float(d["lambda"]), d["method"], bool(d["constant_target"]))


@dataclass
class CvReport:
    grid: np.ndarray
    mean_rmse: np.ndarray
    chosen: float
    folds: int
    fold_rmse: np.ndarray = field(repr=False, default=None)


def standardize(X, y):
    """Centre ``y`` and centre/scale ``X``; zero-variance columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError(f"design {X.shape} and target {y.shape} do not align")
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in design or target")
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    live = x_scale > 0
    Xs = np.zeros_like(X)
    Xs[:, live] = (X[:, live] - x_mean[live]) / x_scale[live]
    y_mean = float(y.mean())
    return Xs, y - y_mean, x_mean, x_scale, y_mean


def _finish(coef, x_mean, x_scale, y_mean, lam, method, constant, sweeps=0):
    live = x_scale > 0
    weights = np.zeros_like(coef)
    weights[live] = coef[live] / x_scale[live]
    intercept = y_mean - float(weights @ x_mean)
    return RegressionModel(weights, intercept, coef, x_mean, x_scale, y_mean, lam, method,
                           constant, sweeps)


def _constant_model(X, y_mean, x_mean, x_scale, lam, method):
    warnings.warn("constant target: returning an intercept-only model", RuntimeWarning,
                  stacklevel=3)
    return _finish(np.zeros(X.shape[1]), x_mean, x_scale, y_mean, lam, method, True)


def lasso_fit(X, y, lam, tol=1e-8, max_sweeps=10_000):
    """Lasso by cyclic coordinate descent on the standardized problem."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    Xs, yc, x_mean, x_scale, y_mean = standardize(X, y)
    if not np.any(yc):
        return _constant_model(Xs, y_mean, x_mean, x_scale, lam, "lasso")
    coef = np.zeros(Xs.shape[1])
    sweeps = _cd.lasso_cd(np.ascontiguousarray(Xs), yc, coef, float(lam), tol, max_sweeps)
    if sweeps < 0:
        logger.warning("lasso did not converge in %d sweeps (lambda=%g)", max_sweeps, lam)
    return _finish(coef, x_mean, x_scale, y_mean, lam, "lasso", False, sweeps)


def ridge_fit(X, y, lam):
    """Ridge via the normal equations ``(Xs'Xs + n lam I) w = Xs'y``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    Xs, yc, x_mean, x_scale, y_mean = standardize(X, y)
    if not np.any(yc):
        return _constant_model(Xs, y_mean, x_mean, x_scale, lam, "ridge")
    live = x_scale > 0
    coef = np.zeros(Xs.shape[1])
    A = Xs[:, live]
    gram = A.T @ A + Xs.shape[0] * lam * np.eye(A.shape[1])
    coef[live] = np.linalg.solve(gram, A.T @ yc)
    return _finish(coef, x_mean, x_scale, y_mean, lam, "ridge", False)


def fit(X, y, lam, method="lasso"):
    if method == "lasso":
        return lasso_fit(X, y, lam)
    if method == "ridge":
        return ridge_fit(X, y, lam)
    raise ValueError(f"unknown method {method!r}")


def predict(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got shape {X.shape}")
    return X @ model.weights + model.intercept


def fold_ids(n, folds, seed):
    """Shuffle with ``seed``, then cut into ``folds`` contiguous chunks."""
    if folds < 2:
        raise ValueError("need at least two folds")
    if n < folds:
        raise ValueError(f"{n} samples cannot fill {folds} folds")
    ids = np.empty(n, dtype=np.int64)
    perm = np.random.default_rng(seed).permutation(n)
    for k, chunk in enumerate(np.array_split(perm, folds)):
        ids[chunk] = k
    return ids


def cross_validate(X, y, method="lasso", folds=5, grid=DEFAULT_GRID, seed=0):
    """Mean validation rMSE per grid value; ties go to the larger lambda."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty regularization grid")
    ids = fold_ids(y.size, folds, seed)
    scores = np.empty((grid.size, folds))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(folds):
            held = ids == k
            for g, lam in enumerate(grid):
                model = fit(X[~held], y[~held], lam, method)
                resid = y[held] - predict(model, X[held])
                scores[g, k] = np.sqrt(np.mean(resid ** 2))
    mean = scores.mean(axis=1)
    best = np.flatnonzero(mean == mean.min())
    chosen = float(grid[best].max())
    return CvReport(grid, mean, chosen, folds, scores)


def fit_cv(X, y, method="lasso", folds=5, grid=DEFAULT_GRID, seed=0):
    """Cross-validate, then refit on all of ``(X, y)`` at the chosen lambda."""
    report = cross_validate(X, y, method, folds, grid, seed)
    return fit(X, y, report.chosen, method), report
