"""MNIST shift study: train classifier variants once, score sets under rotation and roll."""

import logging
import os
import traceback

import numpy as np

from ..datasets import load_idx
from ..intervals import prediction_sets
from ..metrics import CoverageReport, accuracy, brier, coverage_sets, ece, width_sets
from ..models import ClassifierConfig, train_classifier
from ..numerics import pearson
from ..shift import roll_batch, roll_distance, rotate_batch
from ..sources import MNIST_FILES
from .config import ConfigError, config_hash

log = logging.getLogger(__name__)


def load_mnist(data_dir):
    paths = {k: os.path.join(data_dir, v) for k, v in MNIST_FILES.items()}
    missing = [p for p in paths.values() if not os.path.exists(p)]
    if missing:
        raise ConfigError(f"mnist-shift: missing IDX files {missing}")
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return train, test


def shift_levels(mcfg, width):
    """[(shift, severity, transform)] in report order: clean, rotations, rolls."""
    levels = [("none", 0.0, None)]
    levels += [("rotation", float(d), ("rotation", d)) for d in mcfg.rotations]
    levels += [("roll", float(s), ("roll", s)) for s in range(mcfg.roll_step, min(mcfg.roll_max, width) + 1, mcfg.roll_step)]
    return levels


def _transform(images, spec):
    if spec is None:
        return images
    kind, amount = spec
    return rotate_batch(images, amount) if kind == "rotation" else roll_batch(images, int(amount))


def _metrics_row(variant, probs, labels, shift, severity, alpha, seed, h):
    sets = prediction_sets(probs, alpha)
    return CoverageReport(
        variant, "mnist", shift, severity, alpha, coverage_sets(sets, labels), width_sets(sets),
        brier(probs, labels), ece(probs, labels), accuracy(probs, labels), n=labels.size, seed=seed, config_hash=h,
    )


def run_mnist_shift(cfg, data=None):
    """Returns (reports, correlations) where correlations maps variant to the
    Pearson correlation of mean set width against roll distance d(s)."""
    mcfg = cfg.mnist
    alpha = cfg.general.alpha
    seed = cfg.general.seed
    if not mcfg.variants:
        raise ConfigError("mnist-shift: variant list is empty")
    if data is None:
        if not mcfg.data_dir:
            raise ConfigError("mnist-shift: data_dir is not set")
        data = load_mnist(mcfg.data_dir)
    train_full, test = data
    perm = np.random.default_rng(seed).permutation(len(train_full))
    n_val = max(1, int(round(mcfg.val_fraction * len(train_full))))
    val, train = train_full.subset(perm[:n_val]), train_full.subset(perm[n_val:])
    width = test.images.shape[2]
    levels = shift_levels(mcfg, width)
    shifted = [(s, v, _transform(test.images, t)) for s, v, t in levels]
    labels = np.asarray(test.labels)
    reports = []
    correlations = {}
    for variant in mcfg.variants:
        ccfg = ClassifierConfig(variant, mcfg.epochs, mcfg.learning_rate, mcfg.batch_size, mcfg.dropout,
                                mcfg.mc_passes, mcfg.members, 1.0, seed)
        h = config_hash({"variant": variant, "classifier": ccfg.__dict__, "alpha": alpha, "seed": seed,
                         "val_fraction": mcfg.val_fraction})
        try:
            model = train_classifier(train, val, ccfg)
            rows = [_metrics_row(variant, model.predict_proba(imgs, seed=seed), labels, s, v, alpha, seed, h)
                    for s, v, imgs in shifted]
        except Exception:
            log.error("mnist-shift variant %s failed:\n%s", variant, traceback.format_exc())
            rows = [CoverageReport(variant, "mnist", s, v, alpha, None, None, n=labels.size, seed=seed,
                                   status="failed", config_hash=h) for s, v, _ in shifted]
        reports.extend(rows)
        roll_rows = [r for r in rows if r.shift in ("none", "roll") and r.status == "ok"]
        if len(roll_rows) >= 3:
            dist = [roll_distance(int(r.severity), width) for r in roll_rows]
            widths = [r.width for r in roll_rows]
            try:
                correlations[variant] = pearson(dist, widths)
            except ValueError:
                correlations[variant] = float("nan")
        else:
            correlations[variant] = float("nan")
    return reports, correlations


def write_correlations(correlations, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,pearson_width_vs_roll_distance\n")
        for m, r in correlations.items():
            fh.write(f"{m},{r!r}\n")
