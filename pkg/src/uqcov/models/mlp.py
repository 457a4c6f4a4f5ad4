"""ReLU regression MLPs: training, deep ensembles, MC dropout, random search."""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _nn
from .base import MlpConfig, TrainingDivergedError

N_ENSEMBLE = 40
MC_PASSES = 200


@dataclass(frozen=True)
class MlpModel:
    """A trained network; immutable once returned by :func:`train_mlp`."""

    params: np.ndarray
    sizes: np.ndarray
    config: MlpConfig
    label_mean: float
    label_sd: float
    dropout_last_only: bool = False
    val_rmse: float = float("nan")

    def predict(self, x):
        """Deterministic prediction (dropout off), in label units."""
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, self.sizes[0]))
        masks = np.ones((x.shape[0], int(self.sizes[1:-1].sum())))
        return self.label_mean + self.label_sd * _nn._forward(self.params, self.sizes, x, masks)


def _prepare(dataset):
    x = np.ascontiguousarray(dataset.features, dtype=float)
    y = np.ascontiguousarray(dataset.labels, dtype=float)
    return x, y


def train_mlp(train, val, config: MlpConfig, dropout_last_only=False):
    """Fit a ReLU MLP with Adam on half mean squared error.

    Features are expected to be standardized already; labels are standardized
    internally with the training mean and SD and predictions are mapped back.
    Weight decay applies to weights, not biases. Dropout (inverted) acts on
    every hidden layer, or only the last one when ``dropout_last_only``.

    Returns
    -------
    MlpModel
        With ``val_rmse`` recorded on ``val`` (NaN if ``val`` is None).

    Raises
    ------
    TrainingDivergedError
        If the epoch loss becomes non-finite.
    """
    x, y = _prepare(train)
    mu = float(y.mean())
    sd = float(y.std(ddof=1)) if y.size > 1 else 1.0
    if not sd > 0:
        sd = 1.0
    ys = (y - mu) / sd
    rng = np.random.default_rng(config.seed)
    sizes = _nn.layer_sizes(x.shape[1], config.hidden)
    params = _nn.init_params(sizes, rng)
    m1 = np.zeros_like(params)
    m2 = np.zeros_like(params)
    wmask = _nn.weight_mask(sizes)
    step = 0
    n = x.shape[0]
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        masks = _nn.dropout_masks(rng, n, sizes, config.dropout, dropout_last_only)
        with np.errstate(over="ignore", invalid="ignore"):
            loss, step = _nn._mlp_epoch(
                params, m1, m2, step, sizes, x, ys, perm, masks,
                config.batch_size, config.learning_rate, config.weight_decay, wmask,
            )
        if not math.isfinite(loss) or not np.all(np.isfinite(params)):
            raise TrainingDivergedError(epoch)
    model = MlpModel(params, sizes, config, mu, sd, dropout_last_only)
    if val is not None:
        vx, vy = _prepare(val)
        rmse = float(np.sqrt(np.mean((model.predict(vx) - vy) ** 2)))
        model = MlpModel(params, sizes, config, mu, sd, dropout_last_only, rmse)
    return model


def _pool_map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def train_ensemble(train, val, config, n_members=N_ENSEMBLE, workers=1):
    """``n_members`` networks differing only in seed (``config.seed + i``)."""
    if n_members < 2:
        raise ValueError("an ensemble needs at least two members")
    return _pool_map(lambda i: train_mlp(train, val, config.with_(seed=config.seed + i)), range(n_members), workers)


def ensemble_predict(models, x):
    """(n, N) matrix of member predictions, columns in model order."""
    if len(models) < 2:
        raise ValueError("an ensemble needs at least two members")
    return np.column_stack([m.predict(x) for m in models])


def mc_dropout_predict(model, x, passes=MC_PASSES, seed=0):
    """(n, passes) matrix of stochastic forward passes with dropout active."""
    rate = model.config.dropout
    if rate <= 0:
        raise ValueError("MC dropout needs a model trained with dropout rate > 0")
    if passes < 1:
        raise ValueError("passes must be positive")
    x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, model.sizes[0]))
    rng = np.random.default_rng(seed)
    out = np.empty((x.shape[0], passes))
    for k in range(passes):
        masks = _nn.dropout_masks(rng, x.shape[0], model.sizes, rate, model.dropout_last_only)
        out[:, k] = _nn._forward(model.params, model.sizes, x, masks)
    return model.label_mean + model.label_sd * out


# --------------------------------------------------------------------------
# random search

DEFAULT_SPACE = {
    "layers": (1, 2, 3),
    "units": (16, 256),
    "learning_rate": (1e-4, 1e-2),
    "dropout": (0.05, 0.5),
    "batch_size": (32, 64, 128),
    "epochs": (40, 400),
}


def _log_uniform(rng, lo, hi):
    if lo == hi:
        return float(lo)
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def sample_config(rng, space):
    """One draw from the search space; units are drawn per layer."""
    n_layers = int(rng.choice(space["layers"]))
    ulo, uhi = space["units"]
    hidden = tuple(int(round(_log_uniform(rng, ulo, uhi))) for _ in range(n_layers))
    lr = _log_uniform(rng, *space["learning_rate"])
    dlo, dhi = space["dropout"]
    dropout = float(rng.uniform(dlo, dhi)) if dhi > dlo else float(dlo)
    batch = int(rng.choice(space["batch_size"]))
    elo, ehi = space["epochs"]
    epochs = int(rng.integers(elo, ehi + 1))
    seed = int(rng.integers(0, 2**31 - 1))
    return MlpConfig(hidden, dropout, lr, batch, epochs, 0.0, seed)


def validate_space(space):
    full = {**DEFAULT_SPACE, **space}
    unknown = set(space) - set(DEFAULT_SPACE)
    if unknown:
        raise ValueError(f"unknown search-space keys {sorted(unknown)}")
    for key in ("units", "learning_rate", "dropout", "epochs"):
        lo, hi = full[key]
        if lo > hi:
            raise ValueError(f"{key}: lower bound {lo} exceeds upper bound {hi}")
    if full["units"][0] < 1 or full["learning_rate"][0] <= 0 or full["epochs"][0] < 0:
        raise ValueError("units, learning rate and epochs must be positive")
    if not (0 <= full["dropout"][0] and full["dropout"][1] < 1):
        raise ValueError("dropout bounds must lie in [0, 1)")
    if not full["layers"] or not full["batch_size"]:
        raise ValueError("layers and batch_size need at least one choice")
    return full


@dataclass
class SearchResult:
    best: MlpConfig
    best_rmse: float
    trials: list = field(default_factory=list)

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"best": self.best.as_dict(), "best_rmse": self.best_rmse, "trials": self.trials}, fh, indent=1)
            fh.write("\n")


def random_search(train, val, trials=100, space=None, seed=0, workers=1):
    """Random hyperparameter search minimizing validation RMSE.

    Configurations are drawn up front from ``default_rng(seed)``, so the
    outcome does not depend on ``workers``. Ties go to the earlier trial.

    Raises
    ------
    RuntimeError
        If every trial diverged.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    space = validate_space(space or {})
    rng = np.random.default_rng(seed)
    configs = [sample_config(rng, space) for _ in range(trials)]

    def run(cfg):
        try:
            return train_mlp(train, val, cfg).val_rmse, "ok"
        except TrainingDivergedError as exc:
            return float("nan"), f"diverged: {exc}"

    outcomes = _pool_map(run, configs, workers)
    log = []
    best, best_rmse = None, math.inf
    for i, (cfg, (rmse, status)) in enumerate(zip(configs, outcomes)):
        log.append({"trial": i, "config": cfg.as_dict(), "val_rmse": rmse, "status": status})
        if status == "ok" and math.isfinite(rmse) and rmse < best_rmse:
            best, best_rmse = cfg, rmse
    if best is None:
        raise RuntimeError(f"all {trials} search trials diverged")
    return SearchResult(best, best_rmse, log)
