"""Regression benchmark: split, search, train every method, score intervals."""

import csv
import logging
import os
import traceback
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..datasets import apply, fit_standardizer, load_tabular, make_splits
from ..intervals import interval_from_gaussian, interval_from_samples, lr_interval
from ..metrics import CoverageReport, coverage_intervals, width_regression
from ..models import (
    ensemble_predict,
    fit_linear_regression,
    gp_predict,
    mc_dropout_predict,
    random_search,
    select_svi,
    svi_predict,
    train_ensemble,
    train_gp,
    train_mlp,
)
from .config import ConfigError, config_hash

log = logging.getLogger(__name__)

NN_METHODS = {"ensemble", "dropout", "ll_dropout", "svi", "ll_svi"}


def _dataset_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def _interval(method, cell, champion, rcfg, alpha, seed):
    train, val, test = cell
    if method == "linear_regression":
        return lr_interval(fit_linear_regression(train), test.features, alpha)
    if method == "gp":
        gp = train_gp(train, optimize_hyperparameters=rcfg.gp_optimize, cap=rcfg.gp_cap, seed=seed)
        return interval_from_gaussian(gp_predict(gp, test.features), alpha)
    if method == "ensemble":
        members = train_ensemble(train, val, champion, n_members=rcfg.ensemble_size)
        return interval_from_samples(ensemble_predict(members, test.features), alpha)
    if method in ("dropout", "ll_dropout"):
        model = train_mlp(train, val, champion, dropout_last_only=method == "ll_dropout")
        return interval_from_samples(mc_dropout_predict(model, test.features, rcfg.dropout_passes, seed), alpha)
    if method in ("svi", "ll_svi"):
        model = select_svi(train, val, champion, last_layer_only=method == "ll_svi")
        return interval_from_gaussian(svi_predict(model, test.features, rcfg.svi_samples, seed), alpha)
    raise ValueError(f"unknown method {method!r}")


def run_unit(path, dataset, split_seed, cfg, out_dir=None):
    """All methods for one (dataset, split seed); returns reports in method order."""
    rcfg = cfg.regress
    alpha = cfg.general.alpha
    name = _dataset_name(path)
    split = make_splits(len(dataset), split_seed, rcfg.fractions)
    raw_train = dataset.subset(split.train)
    std = fit_standardizer(raw_train)
    train = apply(std, raw_train)
    val = apply(std, dataset.subset(split.val))
    test = apply(std, dataset.subset(split.test))
    s_y = std.label_std
    base_seed = cfg.general.seed * 100_003 + split_seed
    champion = None
    search_error = None
    if NN_METHODS & set(rcfg.methods):
        try:
            res = random_search(train, val, trials=rcfg.trials, space=rcfg.search, seed=base_seed)
            champion = res.best
            if out_dir:
                res.write_log(os.path.join(out_dir, "search", f"{name}_seed{split_seed}.json"))
        except Exception as exc:  # recorded as failed rows below
            search_error = exc
    reports = []
    for method in rcfg.methods:
        meta = {"method": method, "dataset": name, "split_seed": split_seed, "alpha": alpha,
                "fractions": list(rcfg.fractions), "seed": cfg.general.seed}
        if method in NN_METHODS:
            meta["champion"] = champion.as_dict() if champion else None
            meta["counts"] = [rcfg.trials, rcfg.ensemble_size, rcfg.dropout_passes, rcfg.svi_samples]
        if method == "gp":
            meta["gp"] = [rcfg.gp_optimize, rcfg.gp_cap]
        h = config_hash(meta)
        try:
            if method in NN_METHODS and champion is None:
                raise RuntimeError(f"hyperparameter search failed: {search_error}")
            iv = _interval(method, (train, val, test), champion, rcfg, alpha, base_seed)
            reports.append(CoverageReport(
                method, name, "none", 0.0, alpha, coverage_intervals(iv, test.labels),
                width_regression(iv, s_y), n=len(test), seed=split_seed, config_hash=h,
            ))
        except Exception:
            log.error("%s / %s / seed %d failed:\n%s", name, method, split_seed, traceback.format_exc())
            reports.append(CoverageReport(method, name, "none", 0.0, alpha, None, None, n=len(test),
                                          seed=split_seed, status="failed", config_hash=h))
    return reports


def run_regress(cfg, out_dir=None, threads=1):
    """Every (dataset, seed) unit; output order is fixed regardless of ``threads``."""
    rcfg = cfg.regress
    if not rcfg.methods:
        raise ConfigError("regress: method list is empty")
    if not rcfg.datasets:
        raise ConfigError("regress: no datasets configured")
    if not rcfg.seeds:
        raise ConfigError("regress: no split seeds configured")
    if out_dir:
        os.makedirs(os.path.join(out_dir, "search"), exist_ok=True)
    data = []
    for path in rcfg.datasets:
        try:
            data.append((path, load_tabular(path, target_column=rcfg.target_column, name=_dataset_name(path))))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"regress: cannot load {path}: {exc}") from None
    units = [(p, d, s) for p, d in data for s in rcfg.seeds]

    def job(u):
        return run_unit(u[0], u[1], u[2], cfg, out_dir)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, units))
    else:
        results = [job(u) for u in units]
    return [r for unit in results for r in unit]


def summarize(reports):
    """Mean and SD (n-1) of coverage and width per (dataset, method) and per method across datasets.

    Returns rows ``(scope, dataset, method, n, coverage_mean, coverage_sd, width_mean, width_sd)``.
    Scope ``dataset`` averages over split seeds; scope ``all`` averages the
    per-dataset means over datasets.
    """
    ok = [r for r in reports if r.status == "ok"]
    methods = list(dict.fromkeys(r.method for r in reports))
    datasets = list(dict.fromkeys(r.dataset for r in reports))

    def stats(vals):
        vals = np.asarray(vals, dtype=float)
        sd = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
        return float(vals.mean()), sd

    rows = []
    per = {}
    for d in datasets:
        for m in methods:
            sel = [r for r in ok if r.dataset == d and r.method == m]
            if not sel:
                continue
            cm, cs = stats([r.coverage for r in sel])
            wm, ws = stats([r.width for r in sel])
            per[(d, m)] = (cm, wm)
            rows.append(("dataset", d, m, len(sel), cm, cs, wm, ws))
    for m in methods:
        vals = [per[(d, m)] for d in datasets if (d, m) in per]
        if not vals:
            continue
        cm, cs = stats([v[0] for v in vals])
        wm, ws = stats([v[1] for v in vals])
        rows.append(("all", "", m, len(vals), cm, cs, wm, ws))
    return rows


SUMMARY_COLUMNS = ("scope", "dataset", "method", "n", "coverage_mean", "coverage_sd", "width_mean", "width_sd")


def write_summary(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
