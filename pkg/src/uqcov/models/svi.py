"""Mean-field Gaussian variational inference for regression MLPs (Bayes by backprop)."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import _nn
from .base import GaussianPrediction, MlpConfig, TrainingDivergedError

PRIOR_SD = 1.0
MC_SAMPLES = 100
# softplus(-5) ~= 0.0067: start close to the deterministic network
RHO_INIT = -5.0
# Adam moves each coordinate about one learning rate per step, so at the small
# rates the search often picks the posterior scales stay near RHO_INIT.
# select_svi tries these rates for the scales (None = the config's rate).
SCALE_LRS = (None, 1e-3, 3e-3, 1e-2)


@dataclass(frozen=True)
class VariationalLayer:
    """Posterior of one dense layer, weights then bias, flattened."""

    mean: np.ndarray
    log_sd: np.ndarray
    prior_sd: float

    @property
    def sd(self):
        return np.exp(self.log_sd)


@dataclass(frozen=True)
class SviModel:
    mu: np.ndarray
    rho: np.ndarray
    bayes: np.ndarray  # 1 where a weight carries a posterior scale
    log_noise_var: float  # in standardized label units
    sizes: np.ndarray
    config: MlpConfig
    label_mean: float
    label_sd: float
    prior_sd: float
    last_layer_only: bool
    val_rmse: float = float("nan")
    scale_lr: float = float("nan")
    val_nll: float = float("nan")

    @property
    def posterior_sd(self):
        """Per-weight posterior SD; 0 for deterministic weights."""
        return _nn._softplus(self.rho) * self.bayes

    @property
    def noise_variance(self):
        return math.exp(self.log_noise_var) * self.label_sd**2

    def layers(self):
        """Per-layer posterior parameters for layers that are variational."""
        out = []
        p = 0
        sd = self.posterior_sd
        for i in range(len(self.sizes) - 1):
            k = int(self.sizes[i] * self.sizes[i + 1] + self.sizes[i + 1])
            if self.bayes[p] > 0:
                out.append(VariationalLayer(self.mu[p:p + k].copy(), np.log(sd[p:p + k]), self.prior_sd))
            p += k
        return out


def train_svi(train, val, config: MlpConfig, last_layer_only=False, prior_sd=PRIOR_SD, kl_weight=1.0, rho_init=RHO_INIT,
              scale_lr=None):
    """Maximize the ELBO with one reparameterized weight sample per minibatch.

    The objective per datum is mean Gaussian NLL (learned noise variance) plus
    ``kl_weight * KL(q || N(0, prior_sd^2)) / n``. The noise variance is set
    to its optimum given q after every epoch. The posterior scales train at
    ``scale_lr`` (default ``config.learning_rate``). With ``last_layer_only``
    only the output layer is variational; the earlier layers are point
    estimates trained on the same objective, regularized like the point
    network by dropout at ``config.dropout`` (off at prediction). The fully
    variational network ignores ``config.dropout``.

    Raises
    ------
    TrainingDivergedError
        If the ELBO becomes non-finite.
    """
    if prior_sd <= 0:
        raise ValueError("prior_sd must be positive")
    x = np.ascontiguousarray(train.features, dtype=float)
    y = np.ascontiguousarray(train.labels, dtype=float)
    mean = float(y.mean())
    sd = float(y.std(ddof=1)) if y.size > 1 else 1.0
    if not sd > 0:
        sd = 1.0
    ys = (y - mean) / sd
    n = x.shape[0]
    rng = np.random.default_rng(config.seed)
    sizes = _nn.layer_sizes(x.shape[1], config.hidden)
    mu = _nn.init_params(sizes, rng)
    npar = mu.size
    bayes = _nn.last_layer_mask(sizes) if last_layer_only else np.ones(npar)
    theta = np.concatenate([mu, np.full(npar, rho_init), [math.log(0.1)]])
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    lr = np.full(theta.size, config.learning_rate)
    scale_lr = config.learning_rate if scale_lr is None else float(scale_lr)
    if not scale_lr > 0:
        raise ValueError("scale_lr must be positive")
    lr[npar:2 * npar] = scale_lr
    n_batches = -(-n // config.batch_size)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        eps = rng.standard_normal((n_batches, npar))
        masks = _nn.dropout_masks(rng, n, sizes, config.dropout if last_layer_only else 0.0, False)
        obj, step = _nn._svi_epoch(
            theta, m1, m2, step, sizes, x, ys, perm, eps, masks, config.batch_size,
            lr, bayes, prior_sd**2, kl_weight / n,
        )
        if not math.isfinite(obj):
            raise TrainingDivergedError(epoch, "ELBO")
    model = SviModel(
        theta[:npar].copy(), theta[npar:2 * npar].copy(), bayes, float(theta[-1]), sizes, config,
        mean, sd, prior_sd, last_layer_only, scale_lr=scale_lr,
    )
    if val is not None:
        pred = svi_predict(model, val.features, mc_samples=MC_SAMPLES, seed=config.seed)
        yv = np.asarray(val.labels, dtype=float)
        rmse = float(np.sqrt(np.mean((pred.mean - yv) ** 2)))
        nll = float(-np.mean(stats.norm.logpdf(yv, pred.mean, np.sqrt(pred.total_variance))))
        model = replace(model, val_rmse=rmse, val_nll=nll)
    return model


def select_svi(train, val, config: MlpConfig, last_layer_only=False, scale_lrs=SCALE_LRS, **kwargs):
    """Train one model per posterior-scale learning rate; keep the lowest validation NLL.

    Without a validation set only the first rate is trained. Ties keep the
    earlier rate. Extra keyword arguments go to :func:`train_svi`.
    """
    if not scale_lrs:
        raise ValueError("scale_lrs is empty")
    if val is None:
        return train_svi(train, None, config, last_layer_only, scale_lr=scale_lrs[0], **kwargs)
    best = None
    for r in scale_lrs:
        m = train_svi(train, val, config, last_layer_only, scale_lr=r, **kwargs)
        if best is None or m.val_nll < best.val_nll:
            best = m
    return best


def svi_sample_means(model, x, mc_samples=MC_SAMPLES, seed=0):
    """(n, mc_samples) network outputs under independent weight draws, label units."""
    x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, model.sizes[0]))
    rng = np.random.default_rng(seed)
    sd = model.posterior_sd
    masks = np.ones((x.shape[0], int(model.sizes[1:-1].sum())))
    out = np.empty((x.shape[0], mc_samples))
    for k in range(mc_samples):
        w = model.mu + sd * rng.standard_normal(model.mu.size)
        out[:, k] = _nn._forward(w, model.sizes, x, masks)
    return model.label_mean + model.label_sd * out


def svi_predict(model, x, mc_samples=MC_SAMPLES, seed=0):
    """Mean of MC means; epistemic = their variance, aleatoric = learned noise."""
    if mc_samples < 2:
        raise ValueError("mc_samples must be at least 2")
    means = svi_sample_means(model, x, mc_samples, seed)
    return GaussianPrediction(
        means.mean(axis=1),
        means.var(axis=1),
        np.full(means.shape[0], model.noise_variance),
    )
