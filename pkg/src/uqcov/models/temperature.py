"""Temperature scaling of classifier logits."""

import math

import numpy as np
from scipy.special import log_softmax

T_MIN = 0.05
T_MAX = 20.0
TOL = 1e-4


def softmax(logits):
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def apply_temperature(logits, t):
    """Row-wise softmax of ``logits / t``."""
    if not t > 0:
        raise ValueError("temperature must be positive")
    return softmax(np.asarray(logits, dtype=float) / t)


def _nll(logits, labels, t):
    lp = log_softmax(logits / t, axis=1)
    return -float(np.mean(lp[np.arange(labels.size), labels]))


def fit_temperature(logits, labels, tol=TOL):
    """Temperature in [0.05, 20] minimizing validation NLL.

    Golden-section search on log T until the bracket is narrower than ``tol``.
    """
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or z.shape[0] != y.size or y.size == 0:
        raise ValueError("logits must be (n, K) with one label per row")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    f = lambda s: _nll(z, y, math.exp(s))  # noqa: E731
    invphi = (math.sqrt(5) - 1) / 2
    a, b = math.log(T_MIN), math.log(T_MAX)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return float(math.exp((a + b) / 2))
