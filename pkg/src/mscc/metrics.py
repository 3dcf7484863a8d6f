"""Regression quality measures: rMSE, nMSE, weighted correlation."""
import numpy as np


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("empty vectors")
    return y, yhat


def _tasks(Y, Yhat):
    if len(Y) != len(Yhat) or len(Y) == 0:
        raise ValueError("need the same, nonzero number of tasks on both sides")
    return [_pair(y, yh) for y, yh in zip(Y, Yhat)]


def rmse(y, yhat):
    """``sqrt(||y - yhat||^2 / n)``."""
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.sum((y - yhat) ** 2) / y.size))


def nmse(Y, Yhat, ddof=0):
    """Normalized MSE over tasks.

    ``sum_i ||Y_i - Yhat_i||^2 / std(Y_i)`` divided by the total number of
    samples.  ``ddof=0`` uses the population standard deviation.
    """
    num, total = 0.0, 0
    for y, yh in _tasks(Y, Yhat):
        sd = np.std(y, ddof=ddof)
        if not sd > 0:
            raise ValueError("nMSE undefined for a constant target")
        num += np.sum((y - yh) ** 2) / sd
        total += y.size
    return float(num / total)


def weighted_corr(Y, Yhat, constant="raise"):
    """Pearson correlation per task, averaged with task sizes as weights.

    ``constant="zero"`` scores a constant prediction as zero correlation
    instead of raising; a constant target always raises.
    """
    if constant not in ("raise", "zero"):
        raise ValueError("constant must be 'raise' or 'zero'")
    num, total = 0.0, 0
    for y, yh in _tasks(Y, Yhat):
        if y.size < 2:
            raise ValueError("correlation needs at least two samples per task")
        yc, hc = y - y.mean(), yh - yh.mean()
        sy, sh = np.sqrt(yc @ yc), np.sqrt(hc @ hc)
        if sy == 0 or (sh == 0 and constant == "raise"):
            raise ValueError("correlation undefined for a zero-variance vector")
        if sh > 0:
            num += (yc @ hc) / (sy * sh) * y.size
        total += y.size
    return float(num / total)


def aggregate(trials):
    """Mean and sample standard deviation of repeated-trial values."""
    x = np.asarray(trials, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two trials")
    return float(x.mean()), float(x.std(ddof=1))
