"""Set-coverage metrics over externally supplied probability files."""

import numpy as np

from ..intervals import prediction_sets
from ..metrics import CoverageReport, accuracy, brier, coverage_sets, ece, width_sets
from ..probfile import read_probfile
from .config import ConfigError, config_hash


def run_setcov(files, alpha, logits=False):
    """One report per (method, dataset, shift, severity); files sharing a key are pooled."""
    if not files:
        raise ConfigError("setcov: no probability files given")
    groups = {}
    for path in files:
        t = read_probfile(path, logits=logits)
        key = (t.method, t.dataset, t.shift, t.severity)
        if key in groups and groups[key][0].shape[1] != t.n_classes:
            raise ValueError(f"{path}: class count differs from an earlier file with the same metadata")
        probs, labels = groups.get(key, (np.empty((0, t.n_classes)), np.empty(0, dtype=np.int64)))
        groups[key] = (np.vstack([probs, t.probabilities]), np.concatenate([labels, t.labels]))
    reports = []
    for (method, dataset, shift, severity), (probs, labels) in groups.items():
        sets = prediction_sets(probs, alpha)
        reports.append(CoverageReport(
            method, dataset, shift, float(severity), alpha, coverage_sets(sets, labels), width_sets(sets),
            brier(probs, labels), ece(probs, labels), accuracy(probs, labels), n=labels.size,
            config_hash=config_hash({"method": method, "dataset": dataset, "shift": shift,
                                     "severity": severity, "alpha": alpha, "logits": logits}),
        ))
    return reports
