"""Flat-vector multilayer perceptron kernels shared by the MLP and SVI trainers.

Parameters for a network with layer sizes ``[d, h1, ..., hk, 1]`` live in one
float64 vector. Each layer contributes a row-major ``(fan_in, fan_out)``
weight block followed by its bias. Hidden layers use ReLU followed by a
multiplicative mask (inverted dropout; all ones when dropout is off).
"""

import numpy as np

from .._accel import hot


def layer_sizes(n_in, hidden, n_out=1):
    return np.array([n_in, *hidden, n_out], dtype=np.int64)


def n_params(sizes):
    return int(sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1)))


def weight_mask(sizes):
    """1 on weight entries, 0 on biases."""
    parts = []
    for i in range(len(sizes) - 1):
        parts.append(np.ones(sizes[i] * sizes[i + 1]))
        parts.append(np.zeros(sizes[i + 1]))
    return np.concatenate(parts)


def last_layer_mask(sizes):
    """1 on the final layer's weights and bias, 0 elsewhere."""
    total = n_params(sizes)
    last = sizes[-2] * sizes[-1] + sizes[-1]
    out = np.zeros(total)
    out[total - last:] = 1.0
    return out


def init_params(sizes, rng):
    """He-normal weights, zero biases."""
    parts = []
    for i in range(len(sizes) - 1):
        a, b = int(sizes[i]), int(sizes[i + 1])
        parts.append(rng.normal(0.0, np.sqrt(2.0 / a), size=a * b))
        parts.append(np.zeros(b))
    return np.concatenate(parts)


def dropout_masks(rng, n, sizes, rate, last_only):
    """(n, total_hidden) inverted-dropout masks; ones for layers without dropout."""
    hidden = [int(h) for h in sizes[1:-1]]
    masks = np.ones((n, sum(hidden)))
    if rate <= 0:
        return masks
    start = 0
    for i, h in enumerate(hidden):
        if not last_only or i == len(hidden) - 1:
            masks[:, start:start + h] = (rng.random((n, h)) >= rate) / (1.0 - rate)
        start += h
    return masks


@hot()
def _forward(params, sizes, x, masks):
    nl = sizes.size - 1
    h = x
    p = 0
    moff = 0
    for l in range(nl):
        a = sizes[l]
        b = sizes[l + 1]
        w = params[p:p + a * b].reshape((a, b))
        bias = params[p + a * b:p + a * b + b]
        p += a * b + b
        z = np.dot(h, w) + bias
        if l < nl - 1:
            h = np.maximum(z, 0.0) * masks[:, moff:moff + b]
            moff += b
        else:
            h = z
    return h[:, 0].copy()


@hot()
def _loss_grad(params, sizes, x, y, masks):
    """Half mean squared error and its gradient with respect to ``params``."""
    nl = sizes.size - 1
    m = x.shape[0]
    inputs = [x]
    pre = [x]
    h = x
    p = 0
    moff = 0
    for l in range(nl):
        a = sizes[l]
        b = sizes[l + 1]
        w = params[p:p + a * b].reshape((a, b))
        bias = params[p + a * b:p + a * b + b]
        p += a * b + b
        z = np.dot(h, w) + bias
        if l < nl - 1:
            pre.append(z)
            h = np.maximum(z, 0.0) * masks[:, moff:moff + b]
            moff += b
            inputs.append(h)
        else:
            h = z
    resid = h[:, 0] - y
    loss = 0.5 * np.mean(resid * resid)
    grad = np.zeros_like(params)
    delta = (resid / m).reshape((m, 1))
    p = params.size
    for l in range(nl - 1, -1, -1):
        a = sizes[l]
        b = sizes[l + 1]
        p -= a * b + b
        w = params[p:p + a * b].reshape((a, b))
        grad[p:p + a * b] = np.dot(inputs[l].T, delta).ravel()
        grad[p + a * b:p + a * b + b] = delta.sum(axis=0)
        if l > 0:
            moff -= a
            dh = np.dot(delta, w.T)
            delta = dh * masks[:, moff:moff + a] * (pre[l] > 0.0)
    return loss, grad


@hot()
def _adam(theta, g, m1, m2, step, lr):
    b1 = 0.9
    b2 = 0.999
    m1 *= b1
    m1 += (1.0 - b1) * g
    m2 *= b2
    m2 += (1.0 - b2) * g * g
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    theta -= lr * (m1 / c1) / (np.sqrt(m2 / c2) + 1e-8)


@hot()
def _mlp_epoch(params, m1, m2, step, sizes, x, y, perm, masks, batch, lr, wd, wmask):
    n = x.shape[0]
    total = 0.0
    for start in range(0, n, batch):
        idx = perm[start:start + batch]
        loss, g = _loss_grad(params, sizes, x[idx], y[idx], masks[idx])
        if not np.isfinite(loss):
            return np.nan, step
        g += wd * wmask * params
        step += 1
        _adam(params, g, m1, m2, step, lr)
        total += loss * idx.size
    return total / n, step


@hot()
def _softplus(r):
    return np.log1p(np.exp(-np.abs(r))) + np.maximum(r, 0.0)


@hot()
def _svi_epoch(theta, m1, m2, step, sizes, x, y, perm, eps, masks, batch, lr, bayes, prior_var, kl_scale):
    """One pass of Bayes-by-backprop over the data.

    ``theta`` = [mu (P), rho (P), log noise variance]; ``bayes`` marks the
    weights that carry a posterior scale. ``eps`` holds one standard normal
    draw of all P weights per minibatch; ``masks`` are per-row hidden-unit
    masks as in :func:`_mlp_epoch`. Adam updates ``mu`` and ``rho``. The noise
    variance gets its closed-form optimum instead: at the end of the epoch it
    is set to the mean squared residual under the sampled weights. Returns the
    mean negative ELBO per datum and the updated step count.
    """
    n = x.shape[0]
    npar = bayes.size
    total = 0.0
    sse = 0.0
    nb = 0
    grad = np.zeros_like(theta)
    for start in range(0, n, batch):
        idx = perm[start:start + batch]
        mu = theta[:npar]
        rho = theta[npar:2 * npar]
        log_s2 = theta[2 * npar]
        sig = _softplus(rho) * bayes + (1.0 - bayes)
        e = eps[nb] * bayes
        w = mu + sig * e
        half_mse, gw = _loss_grad(w, sizes, x[idx], y[idx], masks[idx])
        s2 = np.exp(log_s2)
        nll = 0.5 * (np.log(2.0 * np.pi) + log_s2) + half_mse / s2
        kl = np.sum(bayes * (0.5 * np.log(prior_var) - np.log(sig) + (sig * sig + mu * mu) / (2.0 * prior_var) - 0.5))
        obj = nll + kl_scale * kl
        if not np.isfinite(obj):
            return np.nan, step
        gw = gw / s2
        grad[:npar] = gw + kl_scale * bayes * mu / prior_var
        gsig = gw * e + kl_scale * (sig / prior_var - 1.0 / sig)
        grad[npar:2 * npar] = bayes * gsig / (1.0 + np.exp(-rho))
        step += 1
        _adam(theta, grad, m1, m2, step, lr)
        total += obj * idx.size
        sse += 2.0 * half_mse * idx.size
        nb += 1
    theta[2 * npar] = np.log(max(sse / n, 1e-8))
    return total / n, step
