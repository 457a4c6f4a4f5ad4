"""Small convolutional image classifiers in plain numpy.

Architecture: 5x5 conv (8 channels), ReLU, 2x2 max-pool, 5x5 conv (16
channels), ReLU, 2x2 max-pool, dense softmax head. Variants differ in how the
probabilities are produced; see :data:`VARIANTS`.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import TrainingDivergedError
from .temperature import apply_temperature, fit_temperature, softmax

VARIANTS = ("vanilla", "temp_scaling", "dropout", "ll_dropout", "svi", "ll_svi", "ensemble")
KSIZE = 5
CHANNELS = (8, 16)


@dataclass(frozen=True)
class ClassifierConfig:
    variant: str = "vanilla"
    epochs: int = 12
    learning_rate: float = 2e-3
    batch_size: int = 64
    dropout: float = 0.1
    mc_passes: int = 32
    members: int = 5
    prior_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.epochs < 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0; batch size and learning rate positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.mc_passes < 1 or self.members < 1 or self.prior_sd <= 0:
            raise ValueError("mc_passes, members and prior_sd must be positive")

    def with_(self, **changes):
        return replace(self, **changes)


class Layout:
    """Shapes and offsets of the flat parameter vector."""

    def __init__(self, image_shape, n_classes):
        h, w = image_shape[:2]
        c = image_shape[2] if len(image_shape) == 3 else 1
        self.image_shape = tuple(image_shape)
        self.in_channels = c
        self.n_classes = n_classes
        h1, w1 = h - KSIZE + 1, w - KSIZE + 1
        p1h, p1w = h1 // 2, w1 // 2
        h2, w2 = p1h - KSIZE + 1, p1w - KSIZE + 1
        p2h, p2w = h2 // 2, w2 // 2
        if p2h < 1 or p2w < 1:
            raise ValueError(f"images of shape {image_shape} are too small for this architecture")
        self.pool1 = (p1h, p1w)
        self.features = p2h * p2w * CHANNELS[1]
        c1, c2 = CHANNELS
        self.shapes = [
            ("w1", (KSIZE * KSIZE * c, c1)), ("b1", (c1,)),
            ("w2", (KSIZE * KSIZE * c1, c2)), ("b2", (c2,)),
            ("w3", (self.features, n_classes)), ("b3", (n_classes,)),
        ]
        self.offsets = {}
        p = 0
        for name, shape in self.shapes:
            k = int(np.prod(shape))
            self.offsets[name] = (p, p + k, shape)
            p += k
        self.size = p

    def unpack(self, flat):
        return {name: flat[a:b].reshape(shape) for name, (a, b, shape) in self.offsets.items()}

    def head_mask(self):
        out = np.zeros(self.size)
        out[self.offsets["w3"][0]:] = 1.0
        return out

    def init(self, rng):
        """He-normal conv weights; zero head so an untrained net is uniform."""
        flat = np.zeros(self.size)
        for name in ("w1", "w2"):
            a, b, shape = self.offsets[name]
            flat[a:b] = rng.normal(0.0, math.sqrt(2.0 / shape[0]), size=b - a)
        return flat


def _as_nhwc(images):
    x = np.asarray(images, dtype=float)
    return x[..., None] if x.ndim == 3 else x


def _im2col(x):
    # (n, H, W, C) -> (n, oh, ow, C*k*k), patch order (C, kh, kw)
    win = sliding_window_view(x, (KSIZE, KSIZE), axis=(1, 2))
    n, oh, ow = win.shape[:3]
    return win.reshape(n, oh, ow, -1)


def _col2im(dcols, in_shape):
    n, h, w, c = in_shape
    oh, ow = dcols.shape[1:3]
    d = dcols.reshape(n, oh, ow, c, KSIZE, KSIZE)
    dx = np.zeros(in_shape)
    for i in range(KSIZE):
        for j in range(KSIZE):
            dx[:, i:i + oh, j:j + ow, :] += d[..., i, j]
    return dx


def _pool(a):
    n, h, w, f = a.shape
    h2, w2 = h // 2, w // 2
    r = a[:, :2 * h2, :2 * w2].reshape(n, h2, 2, w2, 2, f)
    s = r.max(axis=(2, 4))
    return s, r == s[:, :, None, :, None, :]


def _unpool(ds, mask, shape):
    g = mask * ds[:, :, None, :, None, :]
    n, h2, _, w2, _, f = g.shape
    out = np.zeros(shape)
    out[:, :2 * h2, :2 * w2] = g.reshape(n, 2 * h2, 2 * w2, f)
    return out


def forward(layout, flat, x, mask1=None, mask2=None):
    """Logits for a batch in (n, H, W, C) layout, plus a cache for :func:`backward`."""
    p = layout.unpack(flat)
    cols1 = _im2col(x)
    z1 = cols1 @ p["w1"] + p["b1"]
    s1, pm1 = _pool(np.maximum(z1, 0.0))
    if mask1 is not None:
        s1 = s1 * mask1
    cols2 = _im2col(s1)
    z2 = cols2 @ p["w2"] + p["b2"]
    s2, pm2 = _pool(np.maximum(z2, 0.0))
    feat = s2.reshape(x.shape[0], -1)
    if mask2 is not None:
        feat = feat * mask2
    logits = feat @ p["w3"] + p["b3"]
    return logits, (x, cols1, z1, pm1, s1, cols2, z2, pm2, s2.shape, feat, mask1, mask2)


def backward(layout, flat, cache, dlogits):
    x, cols1, z1, pm1, s1, cols2, z2, pm2, s2_shape, feat, mask1, mask2 = cache
    p = layout.unpack(flat)
    g = np.zeros_like(flat)
    gp = layout.unpack(g)
    gp["w3"][...] = feat.T @ dlogits
    gp["b3"][...] = dlogits.sum(axis=0)
    dfeat = dlogits @ p["w3"].T
    if mask2 is not None:
        dfeat = dfeat * mask2
    dz2 = _unpool(dfeat.reshape(s2_shape), pm2, z2.shape) * (z2 > 0)
    flat2 = dz2.reshape(-1, dz2.shape[-1])
    gp["w2"][...] = cols2.reshape(-1, cols2.shape[-1]).T @ flat2
    gp["b2"][...] = flat2.sum(axis=0)
    ds1 = _col2im((flat2 @ p["w2"].T).reshape(*cols2.shape), s1.shape)
    if mask1 is not None:
        ds1 = ds1 * mask1
    dz1 = _unpool(ds1, pm1, z1.shape) * (z1 > 0)
    flat1 = dz1.reshape(-1, dz1.shape[-1])
    gp["w1"][...] = cols1.reshape(-1, cols1.shape[-1]).T @ flat1
    gp["b1"][...] = flat1.sum(axis=0)
    return g


def cross_entropy_grad(logits, labels):
    """Mean cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.mean(logp[np.arange(n), labels]))
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def _masks(rng, layout, n, rate, which):
    if rate <= 0 or which == "none":
        return None, None
    keep = 1.0 - rate
    m2 = (rng.random((n, layout.features)) >= rate) / keep
    if which == "last":
        return None, m2
    m1 = (rng.random((n, *layout.pool1, CHANNELS[0])) >= rate) / keep
    return m1, m2


def _softplus(r):
    return np.log1p(np.exp(-np.abs(r))) + np.maximum(r, 0.0)


@dataclass(frozen=True)
class ClassifierModel:
    """A trained classifier variant; immutable and safe to share for prediction."""

    config: ClassifierConfig
    layout: Layout
    members: tuple  # flat parameter vectors (one unless ensemble)
    rho: np.ndarray | None = None  # SVI posterior scale parameters
    bayes: np.ndarray | None = None
    temperature: float = 1.0
    val_accuracy: float = float("nan")

    def _dropout_kind(self):
        return {"dropout": "all", "ll_dropout": "last"}.get(self.config.variant, "none")

    def logits(self, images, batch_size=500):
        """Deterministic logits of the first member (dropout off, posterior mean)."""
        x = _as_nhwc(images)
        out = [forward(self.layout, self.members[0], x[i:i + batch_size])[0] for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out) if out else np.empty((0, self.layout.n_classes))

    def predict_proba(self, images, seed=0, batch_size=500):
        """(n, K) probabilities; stochastic variants average ``mc_passes`` passes."""
        x = _as_nhwc(images)
        cfg = self.config
        rng = np.random.default_rng(seed)
        out = np.empty((x.shape[0], self.layout.n_classes))
        for i in range(0, x.shape[0], batch_size):
            xb = x[i:i + batch_size]
            if cfg.variant in ("dropout", "ll_dropout"):
                acc = 0.0
                for _ in range(cfg.mc_passes):
                    m1, m2 = _masks(rng, self.layout, xb.shape[0], cfg.dropout, self._dropout_kind())
                    acc = acc + softmax(forward(self.layout, self.members[0], xb, m1, m2)[0])
                out[i:i + xb.shape[0]] = acc / cfg.mc_passes
            elif cfg.variant in ("svi", "ll_svi"):
                sd = _softplus(self.rho) * self.bayes
                acc = 0.0
                for _ in range(cfg.mc_passes):
                    w = self.members[0] + sd * rng.standard_normal(sd.size)
                    acc = acc + softmax(forward(self.layout, w, xb)[0])
                out[i:i + xb.shape[0]] = acc / cfg.mc_passes
            elif cfg.variant == "ensemble":
                out[i:i + xb.shape[0]] = np.mean([softmax(forward(self.layout, m, xb)[0]) for m in self.members], axis=0)
            else:
                out[i:i + xb.shape[0]] = apply_temperature(forward(self.layout, self.members[0], xb)[0], self.temperature)
        return out


def _adam(theta, g, m1, m2, step, lr):
    m1 *= 0.9
    m1 += 0.1 * g
    m2 *= 0.999
    m2 += 0.001 * g * g
    theta -= lr * (m1 / (1 - 0.9**step)) / (np.sqrt(m2 / (1 - 0.999**step)) + 1e-8)


def _train_point(layout, x, y, cfg, seed, dropout_kind):
    rng = np.random.default_rng(seed)
    flat = layout.init(rng)
    m1 = np.zeros_like(flat)
    m2 = np.zeros_like(flat)
    step = 0
    n = x.shape[0]
    rate = cfg.dropout if dropout_kind != "none" else 0.0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            k1, k2 = _masks(rng, layout, idx.size, rate, dropout_kind)
            logits, cache = forward(layout, flat, x[idx], k1, k2)
            loss, d = cross_entropy_grad(logits, y[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            step += 1
            _adam(flat, backward(layout, flat, cache, d), m1, m2, step, cfg.learning_rate)
    return flat


def _train_svi(layout, x, y, cfg, seed, bayes, rho_init=-5.0):
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    mu = layout.init(rng)
    p = mu.size
    theta = np.concatenate([mu, np.full(p, rho_init)])
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    prior_var = cfg.prior_sd**2
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            mu, rho = theta[:p], theta[p:]
            sig = _softplus(rho) * bayes + (1.0 - bayes)
            eps = rng.standard_normal(p) * bayes
            w = mu + sig * eps
            logits, cache = forward(layout, w, x[idx])
            nll, d = cross_entropy_grad(logits, y[idx])
            kl = np.sum(bayes * (0.5 * np.log(prior_var) - np.log(sig) + (sig**2 + mu**2) / (2 * prior_var) - 0.5))
            if not math.isfinite(nll + kl / n):
                raise TrainingDivergedError(epoch, "ELBO")
            gw = backward(layout, w, cache, d)
            grad = np.empty_like(theta)
            grad[:p] = gw + bayes * mu / (prior_var * n)
            gsig = gw * eps + (sig / prior_var - 1.0 / sig) / n
            grad[p:] = bayes * gsig / (1.0 + np.exp(-rho))
            step += 1
            _adam(theta, grad, m1, m2, step, cfg.learning_rate)
    return theta[:p].copy(), theta[p:].copy()


def train_classifier(train, val, config: ClassifierConfig):
    """Train one classifier variant on an :class:`ImageDataset`.

    ``val`` is used only by ``temp_scaling`` (temperature fit) and to record
    validation accuracy.

    Raises
    ------
    TrainingDivergedError
        If the loss becomes non-finite.
    """
    labels = np.asarray(train.labels, dtype=np.int64)
    k = int(train.n_classes)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    x = _as_nhwc(train.images)
    layout = Layout(x.shape[1:], k)
    cfg = config
    v = cfg.variant
    if v in ("vanilla", "temp_scaling"):
        model = ClassifierModel(cfg, layout, (_train_point(layout, x, labels, cfg, cfg.seed, "none"),))
        if v == "temp_scaling":
            if val is None:
                raise ValueError("temp_scaling needs validation data")
            t = fit_temperature(model.logits(val.images), val.labels)
            model = replace(model, temperature=t)
    elif v in ("dropout", "ll_dropout"):
        kind = "all" if v == "dropout" else "last"
        model = ClassifierModel(cfg, layout, (_train_point(layout, x, labels, cfg, cfg.seed, kind),))
    elif v in ("svi", "ll_svi"):
        bayes = np.ones(layout.size) if v == "svi" else layout.head_mask()
        mu, rho = _train_svi(layout, x, labels, cfg, cfg.seed, bayes)
        model = ClassifierModel(cfg, layout, (mu,), rho, bayes)
    else:
        members = tuple(_train_point(layout, x, labels, cfg, cfg.seed + i, "none") for i in range(cfg.members))
        model = ClassifierModel(cfg, layout, members)
    if val is not None:
        acc = float(np.mean(np.argmax(model.predict_proba(val.images, seed=cfg.seed), 1) == np.asarray(val.labels)))
        model = replace(model, val_accuracy=acc)
    return model
