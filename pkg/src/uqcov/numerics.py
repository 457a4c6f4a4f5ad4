"""Dense linear algebra and statistical primitives shared across the package."""

import math

import numpy as np
from scipy import linalg as sla
from scipy import special


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the zero-based index of the leading minor that failed.
    """

    def __init__(self, pivot):
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = pivot


class RankDeficientError(np.linalg.LinAlgError):
    pass


def _as_samples(samples):
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite")
    return s


def quantile(samples, q, axis=None):
    """Linearly interpolated empirical quantile.

    Sorts ascending and interpolates between order statistics ``floor(h)`` and
    ``ceil(h)`` with ``h = q * (n - 1)``. With ``axis`` set, quantiles are
    taken along that axis of a sample matrix.
    """
    s = _as_samples(samples)
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr < 0.0) | (q_arr > 1.0)) or np.any(np.isnan(q_arr)):
        raise ValueError(f"q must lie in [0, 1], got {q}")
    out = np.quantile(s, q_arr, axis=axis, method="linear")
    return float(out) if np.ndim(out) == 0 else out


def _check_open_unit(p, name="p"):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {p}")
    return p_arr


def normal_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile(p):
    """Inverse standard normal CDF."""
    p_arr = _check_open_unit(p)
    out = special.ndtri(p_arr)
    return float(out) if np.ndim(out) == 0 else out


def t_quantile(p, df):
    """Inverse CDF of Student's t with ``df`` degrees of freedom."""
    p_arr = _check_open_unit(p)
    if not df >= 1:
        raise ValueError(f"df must be >= 1, got {df}")
    out = special.stdtrit(float(df), p_arr)
    return float(out) if np.ndim(out) == 0 else out


def cholesky(a):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    No jitter is added; callers that want a retry policy catch
    :class:`NotPositiveDefiniteError`.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    c, info = sla.lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValueError(f"dpotrf argument {-info} invalid")
    return c


def ols_fit(x, y):
    """Least-squares coefficients via the normal equations and Cholesky.

    ``x`` must already carry an intercept column if one is wanted.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n < d:
        raise RankDeficientError(f"{n} rows cannot determine {d} coefficients")
    xtx = x.T @ x
    try:
        chol = cholesky(xtx)
    except NotPositiveDefiniteError as exc:
        raise RankDeficientError(f"design matrix is rank deficient (column {exc.pivot})") from exc
    diag = np.diag(chol) ** 2
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficientError("design matrix is numerically rank deficient")
    return sla.cho_solve((chol, True), x.T @ y)


def pearson(xs, ys):
    """Pearson product-moment correlation."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D sequences of equal length")
    if x.size < 2:
        raise ValueError("pearson needs at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for a zero-variance input")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))
