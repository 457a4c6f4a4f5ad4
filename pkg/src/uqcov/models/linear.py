"""Closed-form ordinary least squares with the quantities its prediction interval needs."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ..numerics import cholesky, ols_fit


@dataclass(frozen=True)
class LinearRegressionFit:
    coefficients: np.ndarray  # intercept first
    residual_se: float
    xtx_inv: np.ndarray
    n: int
    d: int
    x_mean: float | None = None
    x_sd: float | None = None
    y_sd: float | None = None

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim < 2:
            x = x.reshape(-1, 1) if self.d == 1 else x.reshape(1, -1)
        return self.coefficients[0] + x @ self.coefficients[1:]


def fit_linear_regression(train):
    """OLS on a :class:`TabularDataset`, residual SE with ``n - d - 1`` dof."""
    x = np.asarray(train.features, dtype=float)
    y = np.asarray(train.labels, dtype=float)
    n, d = x.shape
    if n <= d + 1:
        raise ValueError(f"need more than d + 1 = {d + 1} rows, got {n}")
    design = np.column_stack([np.ones(n), x])
    coef = ols_fit(design, y)
    resid = y - design @ coef
    s = float(np.sqrt(resid @ resid / (n - d - 1)))
    chol = cholesky(design.T @ design)
    xtx_inv = sla.cho_solve((chol, True), np.eye(d + 1))
    extra = {}
    if d == 1:
        extra = dict(x_mean=float(x[:, 0].mean()), x_sd=float(x[:, 0].std(ddof=1)), y_sd=float(y.std(ddof=1)))
    return LinearRegressionFit(coef, s, xtx_inv, n, d, **extra)
