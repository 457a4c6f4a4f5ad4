"""Coverage, width, Brier score, ECE, and cross-method comparisons."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from ._accel import hot
from .intervals import PROB_SUM_TOL, PredictionInterval, PredictionSetBatch
from .numerics import ols_fit

REPORT_COLUMNS = (
    "method", "dataset", "shift", "severity", "alpha", "coverage", "width",
    "brier", "ece", "accuracy", "n", "seed", "status", "config_hash",
)


@dataclass(frozen=True)
class CoverageReport:
    method: str
    dataset: str
    shift: str
    severity: float
    alpha: float
    coverage: float | None
    width: float | None
    brier: float | None = None
    ece: float | None = None
    accuracy: float | None = None
    n: int = 0
    seed: int | None = None
    status: str = "ok"
    config_hash: str = ""

    def __post_init__(self):
        if self.status == "ok":
            if not 0.0 <= self.coverage <= 1.0:
                raise ValueError(f"coverage {self.coverage} outside [0, 1]")
            if self.width < 0:
                raise ValueError(f"negative width {self.width}")
            if self.n <= 0:
                raise ValueError("sample count must be positive")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def write_reports_csv(reports, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(reports_to_csv(reports))


def write_reports_json(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=1, sort_keys=False)
        fh.write("\n")


_FLOAT_COLS = {"severity", "alpha", "coverage", "width", "brier", "ece", "accuracy"}
_INT_COLS = {"n", "seed"}


def read_reports_csv(path):
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REPORT_COLUMNS[:13] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: report is missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            kw = {}
            try:
                for c in REPORT_COLUMNS:
                    raw = row.get(c, "")
                    if c in _FLOAT_COLS:
                        kw[c] = float(raw) if raw != "" else None
                    elif c in _INT_COLS:
                        kw[c] = int(raw) if raw != "" else None
                    else:
                        kw[c] = raw or ""
                if kw["n"] is None:
                    kw["n"] = 0
                out.append(CoverageReport(**kw))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return out


# --------------------------------------------------------------------------
# regression


def _as_bounds(intervals):
    if isinstance(intervals, PredictionInterval):
        return np.atleast_1d(np.asarray(intervals.lower, float)), np.atleast_1d(np.asarray(intervals.upper, float))
    intervals = list(intervals)
    return (
        np.array([float(iv.lower) for iv in intervals]),
        np.array([float(iv.upper) for iv in intervals]),
    )


def coverage_intervals(intervals, y):
    """Fraction of labels inside their (closed) intervals."""
    lo, hi = _as_bounds(intervals)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if lo.shape != y.shape:
        raise ValueError(f"{lo.size} intervals but {y.size} labels")
    if y.size == 0:
        raise ValueError("no samples")
    return float(np.mean((lo <= y) & (y <= hi)))


def width_regression(intervals, s_y):
    """Mean interval width in units of the training-label standard deviation."""
    if not s_y > 0:
        raise ValueError("s_y must be positive")
    lo, hi = _as_bounds(intervals)
    return float(np.mean(hi - lo) / s_y)


# --------------------------------------------------------------------------
# classification


def _set_membership(sets, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if isinstance(sets, PredictionSetBatch):
        if len(sets) != labels.size:
            raise ValueError(f"{len(sets)} sets but {labels.size} labels")
        hit = sets.members[np.arange(labels.size), labels]
        return hit, sets.sizes
    sets = list(sets)
    if len(sets) != labels.size:
        raise ValueError(f"{len(sets)} sets but {labels.size} labels")
    hit = np.array([int(lab) in s.classes for s, lab in zip(sets, labels)], dtype=bool)
    return hit, np.array([len(s.classes) for s in sets])


def coverage_sets(sets, labels):
    hit, _ = _set_membership(sets, labels)
    if hit.size == 0:
        raise ValueError("no samples")
    return float(hit.mean())


def width_sets(sets):
    if isinstance(sets, PredictionSetBatch):
        sizes = sets.sizes
    else:
        sizes = np.array([len(s.classes) for s in sets])
    if sizes.size == 0:
        raise ValueError("no samples")
    return float(sizes.mean())


def _check_probs(probs, labels):
    p = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] != labels.size:
        raise ValueError("probabilities must be (n, K) with one label per row")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1) > PROB_SUM_TOL):
        raise ValueError("rows must be probability vectors")
    if labels.size and (labels.min() < 0 or labels.max() >= p.shape[1]):
        raise ValueError("labels out of range")
    return p, labels


def brier(probs, labels):
    """Mean squared distance between probability rows and one-hot labels (not divided by K)."""
    p, labels = _check_probs(probs, labels)
    onehot = np.zeros_like(p)
    onehot[np.arange(labels.size), labels] = 1.0
    return float(np.mean(np.sum((p - onehot) ** 2, axis=1)))


def accuracy(probs, labels):
    p, labels = _check_probs(probs, labels)
    return float(np.mean(np.argmax(p, axis=1) == labels))


def _ece_numpy(conf, correct, bins):
    idx = np.clip(np.ceil(conf * bins).astype(np.int64) - 1, 0, bins - 1)
    conf_sum = np.bincount(idx, weights=conf, minlength=bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=bins)
    gap = np.abs(acc_sum - conf_sum)  # n_b * |acc_b - conf_b|
    return gap.sum() / conf.size


@hot(fallback=_ece_numpy)
def _ece_kernel(conf, correct, bins):
    conf_sum = np.zeros(bins)
    acc_sum = np.zeros(bins)
    for i in range(conf.size):
        b = int(math.ceil(conf[i] * bins)) - 1
        if b < 0:
            b = 0
        elif b > bins - 1:
            b = bins - 1
        conf_sum[b] += conf[i]
        acc_sum[b] += correct[i]
    total = 0.0
    for b in range(bins):
        total += abs(acc_sum[b] - conf_sum[b])
    return total / conf.size


def ece(probs, labels, bins=15):
    """Expected calibration error over equal-width confidence bins ``(lo, hi]``."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    p, labels = _check_probs(probs, labels)
    if labels.size == 0:
        raise ValueError("no samples")
    pred = np.argmax(p, axis=1)
    conf = np.ascontiguousarray(p[np.arange(labels.size), pred])
    correct = (pred == labels).astype(np.float64)
    return float(_ece_kernel(conf, correct, int(bins)))


# --------------------------------------------------------------------------
# cross-method analysis

ABOVE_TOL = 1e-12


def fraction_above_line(points):
    """Per-method fraction of (width, coverage) points strictly above a pooled OLS line.

    ``points`` maps method name to a sequence of ``(width, coverage)`` pairs.
    One line ``coverage ~ width`` is fit to all methods' points together.
    """
    methods = list(points)
    arrays = {m: np.asarray(points[m], dtype=float).reshape(-1, 2) for m in methods}
    pooled = np.concatenate([arrays[m] for m in methods]) if methods else np.empty((0, 2))
    if pooled.shape[0] < 2 or np.unique(pooled[:, 0]).size < 2:
        raise ValueError("need at least two distinct widths to fit a coverage-width line")
    design = np.column_stack([np.ones(pooled.shape[0]), pooled[:, 0]])
    intercept, slope = ols_fit(design, pooled[:, 1])
    out = {}
    for m in methods:
        w, c = arrays[m][:, 0], arrays[m][:, 1]
        out[m] = float(np.mean(c > intercept + slope * w + ABOVE_TOL)) if w.size else float("nan")
    return out, (float(intercept), float(slope))


def method_ranks(scores, higher_is_better=True):
    """Rank 1 is best; ties share the average of the ranks they span."""
    methods = list(scores)
    if len(methods) < 2:
        raise ValueError("ranking needs at least two methods")
    vals = np.array([float(scores[m]) for m in methods])
    ranks = rankdata(-vals if higher_is_better else vals, method="average")
    return {m: float(r) for m, r in zip(methods, ranks)}
