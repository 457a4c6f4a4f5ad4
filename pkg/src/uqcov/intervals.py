"""Prediction intervals (regression) and minimum prediction sets (classification)."""

import warnings
from dataclasses import dataclass

import numpy as np

from ._accel import hot
from .numerics import normal_quantile, quantile, t_quantile

PROB_SUM_TOL = 1e-4
# slack on the 1 - alpha threshold so float rounding of a cumulative sum that
# equals it exactly does not pull in an extra class
MASS_TOL = 1e-12


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class PredictionInterval:
    """Closed interval ``[lower, upper]``; fields may be arrays over samples."""

    lower: np.ndarray
    upper: np.ndarray
    alpha: float

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper differ in shape")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("interval bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def width(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    def __len__(self):
        return np.asarray(self.lower).size

    def __getitem__(self, i):
        return PredictionInterval(float(np.asarray(self.lower).ravel()[i]), float(np.asarray(self.upper).ravel()[i]), self.alpha)

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        return (np.asarray(self.lower) <= y) & (y <= np.asarray(self.upper))


def interval_from_samples(samples, alpha=0.05):
    """Central interval between the alpha/2 and 1 - alpha/2 sample quantiles.

    ``samples`` is one sample vector, or an (n, S) matrix with S Monte-Carlo
    predictions for each of n points.
    """
    _check_alpha(alpha)
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("no samples")
    per_point = s.shape[-1]
    if per_point < 20:
        warnings.warn(f"only {per_point} samples per point; tail quantiles are unreliable", stacklevel=2)
    axis = None if s.ndim == 1 else -1
    lo = quantile(s, alpha / 2, axis=axis)
    hi = quantile(s, 1 - alpha / 2, axis=axis)
    return PredictionInterval(lo, hi, alpha)


def interval_from_gaussian(pred, alpha=0.05):
    """mean +/- z_{1-alpha/2} * sqrt(epistemic + aleatoric variance)."""
    _check_alpha(alpha)
    epi = np.asarray(pred.epistemic_variance, dtype=float)
    ale = np.asarray(pred.aleatoric_variance, dtype=float)
    if np.any(epi < 0) or np.any(ale < 0):
        raise ValueError("variances must be non-negative")
    half = normal_quantile(1 - alpha / 2) * np.sqrt(epi + ale)
    mean = np.asarray(pred.mean, dtype=float)
    return PredictionInterval(mean - half, mean + half, alpha)


def lr_interval(fit, x, alpha=0.05):
    """Closed-form OLS prediction interval.

    One feature: yhat +/- t_{n-2} s sqrt(1 + 1/n + (x - xbar)^2 / ((n-1) s_x^2)).
    Several features: yhat +/- t_{n-d-1} s sqrt(1 + x0' (X'X)^-1 x0) with the
    intercept included in x0. The two agree when d = 1.
    """
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if x.ndim < 2:
        x = x.reshape(-1, 1) if fit.d == 1 else x.reshape(1, -1)
    yhat = fit.predict(x)
    t = t_quantile(1 - alpha / 2, fit.n - fit.d - 1)
    if fit.d == 1:
        lev = 1.0 / fit.n + (x[:, 0] - fit.x_mean) ** 2 / ((fit.n - 1) * fit.x_sd**2)
    else:
        x0 = np.column_stack([np.ones(x.shape[0]), x])
        lev = np.einsum("ij,jk,ik->i", x0, fit.xtx_inv, x0)
    half = t * fit.residual_se * np.sqrt(1.0 + lev)
    return PredictionInterval(yhat - half, yhat + half, alpha)


# --------------------------------------------------------------------------
# prediction sets


@dataclass(frozen=True)
class PredictionSet:
    classes: frozenset
    alpha: float
    accumulated_mass: float

    @property
    def size(self):
        return len(self.classes)

    def __contains__(self, c):
        return c in self.classes


@dataclass(frozen=True)
class PredictionSetBatch:
    """Prediction sets for n samples: boolean (n, K) membership plus masses."""

    members: np.ndarray
    mass: np.ndarray
    alpha: float

    def __len__(self):
        return self.members.shape[0]

    @property
    def sizes(self):
        return self.members.sum(axis=1)

    def __getitem__(self, i):
        return PredictionSet(frozenset(np.flatnonzero(self.members[i]).tolist()), self.alpha, float(self.mass[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _normalize_rows(probs):
    p = np.asarray(probs, dtype=float)
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError(f"probabilities must be (n, K) with K >= 2, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ValueError("probabilities must be finite and non-negative")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_SUM_TOL)
    if bad.size:
        raise ValueError(f"row {bad[0]} sums to {sums[bad[0]]!r}, outside 1 +/- {PROB_SUM_TOL}")
    return p / sums[:, None]


def _sets_numpy(probs, threshold):
    n, k = probs.shape
    order = np.argsort(-probs, axis=1, kind="stable")
    sorted_p = np.take_along_axis(probs, order, axis=1)
    cums = np.cumsum(sorted_p, axis=1)
    size = np.minimum(1 + np.sum(cums < threshold, axis=1), k)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(k)[None, :].repeat(n, axis=0), axis=1)
    members = ranks < size[:, None]
    mass = cums[np.arange(n), size - 1]
    return members, mass


@hot(fallback=_sets_numpy)
def _sets_kernel(probs, threshold):
    n, k = probs.shape
    members = np.zeros((n, k), dtype=np.bool_)
    mass = np.zeros(n)
    for i in range(n):
        order = np.argsort(-probs[i], kind="mergesort")
        acc = 0.0
        for j in range(k):
            c = order[j]
            acc += probs[i, c]
            members[i, c] = True
            if acc >= threshold:
                break
        mass[i] = acc
    return members, mass


def prediction_sets(probs, alpha=0.05):
    """Minimum prediction sets for every row of an (n, K) probability matrix.

    Classes enter in decreasing probability (ties: lower index first) until
    the accumulated mass reaches 1 - alpha.
    """
    _check_alpha(alpha)
    p = _normalize_rows(probs)
    members, mass = _sets_kernel(np.ascontiguousarray(p), 1.0 - alpha - MASS_TOL)
    return PredictionSetBatch(members, mass, alpha)


def prediction_set(probs, alpha=0.05):
    """Minimum prediction set for one length-K probability vector."""
    return prediction_sets(np.asarray(probs, dtype=float)[None, :], alpha)[0]
