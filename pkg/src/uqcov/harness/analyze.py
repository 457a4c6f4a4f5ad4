"""Cross-method analysis of report tables: points above the pooled line, and rank tables."""

import csv
import json
import math
import os

import numpy as np

from ..metrics import fraction_above_line, method_ranks, read_reports_csv

RANK_METRICS = (("coverage", True), ("brier", False), ("ece", False))


class AnalysisError(ValueError):
    pass


def _level_key(r, group_by):
    return f"{r.shift}:{r.severity!r}" if group_by == "shift_severity" else repr(r.severity)


def analyze_reports(reports, group_by="severity"):
    """Fractions above the pooled coverage-width line per level, plus rank tables.

    Returns a JSON-ready dict. Levels are severities (or shift/severity pairs),
    listed in ascending order of severity.
    """
    ok = [r for r in reports if r.status == "ok" and r.coverage is not None and r.width is not None]
    methods = list(dict.fromkeys(r.method for r in ok))
    if len(methods) < 2:
        raise AnalysisError(f"analysis needs at least two methods, found {methods}")

    levels = {}
    for r in ok:
        levels.setdefault(_level_key(r, group_by), []).append(r)
    order = sorted(levels, key=lambda k: (levels[k][0].severity, k))
    level_out = []
    for key in order:
        rows = levels[key]
        points = {}
        for r in rows:
            points.setdefault(r.method, []).append([r.width, r.coverage])
        if len(points) < 2:
            raise AnalysisError(f"level {key}: needs at least two methods, found {list(points)}")
        try:
            fractions, (icpt, slope) = fraction_above_line(points)
        except ValueError as exc:
            raise AnalysisError(f"level {key}: {exc}") from None
        level_out.append({
            "level": key, "severity": rows[0].severity,
            "shift": rows[0].shift if group_by == "shift_severity" else None,
            "points": points, "line": [icpt, slope], "fractions": fractions,
        })

    cells = {}
    for r in ok:
        cells.setdefault((r.dataset, r.shift, r.severity, r.seed), []).append(r)
    rank_rows = []
    for (dataset, shift, severity, seed), rows in cells.items():
        if len({r.method for r in rows}) != len(rows) or len(rows) < 2:
            continue
        for metric, higher in RANK_METRICS:
            vals = {r.method: getattr(r, metric) for r in rows}
            if any(v is None or (isinstance(v, float) and math.isnan(v)) for v in vals.values()):
                continue
            for m, rank in method_ranks(vals, higher_is_better=higher).items():
                rank_rows.append({"metric": metric, "dataset": dataset, "shift": shift, "severity": severity,
                                  "seed": seed, "level": _level_key(rows[0], group_by), "method": m, "score": vals[m], "rank": rank})

    mean_ranks = []
    for metric, _ in RANK_METRICS:
        for key in order:
            for m in methods:
                rs = [x["rank"] for x in rank_rows if x["metric"] == metric and x["level"] == key and x["method"] == m]
                if rs:
                    mean_ranks.append({"metric": metric, "level": key, "method": m,
                                       "mean_rank": float(np.mean(rs)), "cells": len(rs)})

    series = {}
    for r in ok:
        series.setdefault(f"{r.dataset}|{r.shift}", {}).setdefault(r.method, []).append([r.severity, r.coverage, r.width])
    # the clean row (shift "none") anchors each shift curve at severity 0
    for name in list(series):
        dataset, shift = name.split("|", 1)
        if shift == "none":
            continue
        base = series.get(f"{dataset}|none", {})
        for m, pts in series[name].items():
            pts.extend(p for p in base.get(m, []) if not any(q[0] == p[0] for q in pts))
            pts.sort()
    return {"group_by": group_by, "methods": methods, "levels": level_out, "ranks": rank_rows,
            "mean_ranks": mean_ranks, "series": series}


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def write_analysis(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "analysis.json"), "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "analysis_fractions.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "method", "fraction_above", "n_points", "intercept", "slope"])
        for lv in result["levels"]:
            for m, frac in lv["fractions"].items():
                w.writerow([lv["level"], m, repr(frac), len(lv["points"][m]), repr(lv["line"][0]), repr(lv["line"][1])])
    with open(os.path.join(out_dir, "analysis_ranks.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["metric", "dataset", "shift", "severity", "seed", "level", "method", "score", "rank"]
        w.writerow(cols)
        for row in result["ranks"]:
            w.writerow([_cell(row[c]) for c in cols])
    with open(os.path.join(out_dir, "analysis_mean_ranks.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["metric", "level", "method", "mean_rank", "cells"]
        w.writerow(cols)
        for row in result["mean_ranks"]:
            w.writerow([_cell(row[c]) for c in cols])


def run_analyze(paths, group_by="severity"):
    if not paths:
        raise AnalysisError("analyze: no report files given")
    reports = []
    for p in paths:
        reports.extend(read_reports_csv(p))
    return analyze_reports(reports, group_by)
