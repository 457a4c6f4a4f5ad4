"""Exact Gaussian-process regression with a squared-exponential ARD kernel."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

from ..numerics import NotPositiveDefiniteError, cholesky
from .base import GaussianPrediction

TRAIN_CAP = 2000
JITTER_START = 1e-10
JITTER_MAX = 1e-4
NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class GpFit:
    amplitude: float  # kernel variance
    lengthscales: np.ndarray
    noise_variance: float
    chol: np.ndarray  # lower factor of K + (noise + jitter) I
    alpha_vec: np.ndarray  # (K + sigma^2 I)^-1 y
    x: np.ndarray
    y: np.ndarray
    jitter: float = 0.0
    label_mean: float = 0.0
    label_sd: float = 1.0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")


def se_kernel(a, b, amplitude, lengthscales):
    a = np.asarray(a, dtype=float) / lengthscales
    b = np.asarray(b, dtype=float) / lengthscales
    sq = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return amplitude * np.exp(-0.5 * np.maximum(sq, 0.0))


def _factor(k, noise):
    """Cholesky of k + noise*I, escalating jitter 1e-10, 1e-9, ... up to 1e-4."""
    n = k.shape[0]
    jitter = 0.0
    while True:
        try:
            return cholesky(k + (noise + jitter) * np.eye(n)), jitter
        except NotPositiveDefiniteError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise


def median_lengthscale(x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        return 1.0
    d = pdist(x)
    med = float(np.median(d[d > 0])) if np.any(d > 0) else 1.0
    return med


def _neg_log_marginal(log_params, x, y):
    """Negative log marginal likelihood and its gradient in log-parameter space."""
    d = x.shape[1]
    amp = math.exp(log_params[0])
    ls = np.exp(log_params[1:1 + d])
    noise = math.exp(log_params[-1]) + NOISE_FLOOR
    k = se_kernel(x, x, amp, ls)
    n = x.shape[0]
    try:
        chol = sla.cholesky(k + noise * np.eye(n), lower=True)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(log_params)
    alpha = sla.cho_solve((chol, True), y)
    nll = 0.5 * y @ alpha + np.sum(np.log(np.diag(chol))) + 0.5 * n * math.log(2 * math.pi)
    kinv = sla.cho_solve((chol, True), np.eye(n))
    inner = np.outer(alpha, alpha) - kinv  # d nll / dK = -0.5 * inner
    grad = np.empty_like(log_params)
    grad[0] = -0.5 * np.sum(inner * k)
    for j in range(d):
        diff = (x[:, j][:, None] - x[:, j][None, :]) ** 2 / ls[j] ** 2
        grad[1 + j] = -0.5 * np.sum(inner * k * diff)
    grad[-1] = -0.5 * np.trace(inner) * (noise - NOISE_FLOOR)
    return float(nll), grad


def train_gp(train, optimize_hyperparameters=True, amplitude=None, lengthscales=None, noise_variance=None,
             cap=TRAIN_CAP, seed=0, standardize_labels=True):
    """Fit an exact GP posterior.

    Hyperparameters given explicitly are held fixed. Otherwise they are set by
    L-BFGS on the log marginal likelihood (``optimize_hyperparameters``) or by
    the median-distance lengthscale heuristic with unit amplitude and noise
    0.1 in standardized label units.

    Training sets above ``cap`` rows are subsampled with ``default_rng(seed)``.

    Raises
    ------
    NotPositiveDefiniteError
        If the kernel matrix is not positive definite even with 1e-4 jitter.
    """
    x = np.asarray(train.features, dtype=float)
    y = np.asarray(train.labels, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] > cap:
        keep = np.sort(np.random.default_rng(seed).choice(x.shape[0], cap, replace=False))
        x, y = x[keep], y[keep]
    n, d = x.shape
    if standardize_labels:
        mean = float(y.mean())
        sd = float(y.std(ddof=1)) if n > 1 else 1.0
        if not sd > 0:
            sd = 1.0
    else:
        mean, sd = 0.0, 1.0
    ys = (y - mean) / sd

    fixed = amplitude is not None and lengthscales is not None and noise_variance is not None
    if fixed:
        amp = float(amplitude) / sd**2
        ls = np.broadcast_to(np.asarray(lengthscales, dtype=float), (d,)).copy()
        noise = float(noise_variance) / sd**2
    else:
        amp, ls, noise = 1.0, np.full(d, median_lengthscale(x)), 0.1
        if optimize_hyperparameters:
            start = np.concatenate([[math.log(amp)], np.log(ls), [math.log(noise)]])
            res = minimize(_neg_log_marginal, start, args=(x, ys), jac=True, method="L-BFGS-B",
                           bounds=[(-10, 10)] * (d + 1) + [(-14, 5)])
            amp = math.exp(res.x[0])
            ls = np.exp(res.x[1:1 + d])
            noise = math.exp(res.x[-1]) + NOISE_FLOOR
    k = se_kernel(x, x, amp, ls)
    chol, jitter = _factor(k, noise)
    alpha = sla.cho_solve((chol, True), ys)
    return GpFit(amp * sd**2, ls, noise * sd**2, chol, alpha, x, ys, jitter, mean, sd)


def gp_predict(gp, x):
    """Posterior mean, latent variance (epistemic) and noise variance (aleatoric)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, gp.x.shape[1])
    amp = gp.amplitude / gp.label_sd**2
    ks = se_kernel(x, gp.x, amp, gp.lengthscales)
    mean = ks @ gp.alpha_vec
    v = sla.solve_triangular(gp.chol, ks.T, lower=True)
    var = np.maximum(amp - np.sum(v * v, axis=0), 0.0)
    s2 = gp.label_sd**2
    return GaussianPrediction(
        gp.label_mean + gp.label_sd * mean,
        var * s2,
        np.full(x.shape[0], gp.noise_variance),
    )
