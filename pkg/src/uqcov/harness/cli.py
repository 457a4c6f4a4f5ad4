"""Command-line entry point: ``uqcov <subcommand> [options]``.

Exit codes: 0 success, 1 at least one failed cell, 2 invalid config or inputs.
"""

import argparse
import logging
import os
import sys

from ..metrics import write_reports_csv
from ..probfile import ProbfileError
from .analyze import AnalysisError, run_analyze, write_analysis
from .config import ConfigError, ExperimentConfig, load_config, validate

EXIT_OK, EXIT_FAILED_CELL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("uqcov")


def _global_flags(parser, suppress):
    # registered on the main parser and on every subparser so flags work on either side
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="experiment config file")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--seed", type=int, default=d, help="global seed")
    parser.add_argument("--alpha", type=float, default=d, help="miscoverage level")
    parser.add_argument("--threads", type=int, default=d, help="worker threads")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    p = argparse.ArgumentParser(prog="uqcov", description="Coverage and width of uncertainty-quantification methods")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("regress", help="regression benchmark over tabular datasets")
    _global_flags(s, suppress=True)
    s.add_argument("--datasets", nargs="+", help="CSV files (overrides the config)")
    s.add_argument("--methods", nargs="+", help="methods to run (overrides the config)")

    s = sub.add_parser("mnist-shift", help="classifier variants under rotation and roll")
    _global_flags(s, suppress=True)
    s.add_argument("--data-dir", help="directory holding the MNIST IDX files")
    s.add_argument("--variants", nargs="+", help="classifier variants (overrides the config)")

    s = sub.add_parser("setcov", help="set metrics over probability files")
    _global_flags(s, suppress=True)
    s.add_argument("files", nargs="*", help="probability files (overrides the config)")
    s.add_argument("--logits", action="store_true", default=None, help="rows hold logits, apply softmax")

    s = sub.add_parser("analyze", help="fraction above line and rank tables over report CSVs")
    _global_flags(s, suppress=True)
    s.add_argument("reports", nargs="*", help="report CSV files (overrides the config)")
    s.add_argument("--group-by", choices=("severity", "shift_severity"))

    s = sub.add_parser("report", help="SVG plots from analysis output")
    _global_flags(s, suppress=True)
    s.add_argument("analysis", nargs="?", help="analysis.json or its directory")
    return p


def _load(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    g = cfg.general
    if args.seed is not None:
        g.seed = args.seed
    if args.alpha is not None:
        g.alpha = args.alpha
    if args.threads is not None:
        g.threads = args.threads
    if args.out is not None:
        g.out = args.out
    cmd = args.command
    if cmd == "regress":
        if args.datasets:
            cfg.regress.datasets = [os.path.abspath(p) for p in args.datasets]
        if args.methods is not None:
            cfg.regress.methods = list(args.methods)
    elif cmd == "mnist-shift":
        if args.data_dir:
            cfg.mnist.data_dir = os.path.abspath(args.data_dir)
        if args.variants is not None:
            cfg.mnist.variants = list(args.variants)
    elif cmd == "setcov":
        if args.files:
            cfg.setcov.files = list(args.files)
        if args.logits:
            cfg.setcov.logits = True
    elif cmd == "analyze":
        if args.reports:
            cfg.analyze.reports = list(args.reports)
        if args.group_by:
            cfg.analyze.group_by = args.group_by
    elif cmd == "report" and args.analysis:
        cfg.report.analysis = args.analysis
    validate(cfg, args.config or "<command line>")
    return cfg


def _status(reports):
    failed = [r for r in reports if r.status != "ok"]
    if failed:
        log.warning("%d of %d cells failed", len(failed), len(reports))
    return EXIT_FAILED_CELL if failed else EXIT_OK


def cmd_regress(cfg):
    from .regress import run_regress, summarize, write_summary

    out = cfg.general.out
    os.makedirs(out, exist_ok=True)
    reports = run_regress(cfg, out, threads=cfg.general.threads)
    write_reports_csv(reports, os.path.join(out, "regress.csv"))
    write_summary(summarize(reports), os.path.join(out, "regress_summary.csv"))
    return _status(reports)


def cmd_mnist_shift(cfg):
    from .mnist import run_mnist_shift, write_correlations

    out = cfg.general.out
    os.makedirs(out, exist_ok=True)
    reports, corr = run_mnist_shift(cfg)
    write_reports_csv(reports, os.path.join(out, "mnist_shift.csv"))
    write_correlations(corr, os.path.join(out, "mnist_correlations.csv"))
    return _status(reports)


def cmd_setcov(cfg):
    from .setcov import run_setcov

    out = cfg.general.out
    os.makedirs(out, exist_ok=True)
    reports = run_setcov(cfg.setcov.files, cfg.general.alpha, logits=cfg.setcov.logits)
    write_reports_csv(reports, os.path.join(out, "setcov.csv"))
    return _status(reports)


def cmd_analyze(cfg):
    if cfg.analyze.group_by not in ("severity", "shift_severity"):
        raise ConfigError(f"analyze: group_by must be 'severity' or 'shift_severity', got {cfg.analyze.group_by!r}")
    result = run_analyze(cfg.analyze.reports, cfg.analyze.group_by)
    write_analysis(result, cfg.general.out)
    return EXIT_OK


def cmd_report(cfg):
    from .report import load_analysis, write_report

    src = cfg.report.analysis or cfg.general.out
    names = write_report(load_analysis(src), os.path.join(cfg.general.out, "figures"))
    log.info("wrote %d figures", len(names))
    return EXIT_OK


COMMANDS = {"regress": cmd_regress, "mnist-shift": cmd_mnist_shift, "setcov": cmd_setcov,
            "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ProbfileError, AnalysisError) as exc:
        print(f"uqcov {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # malformed inputs (report CSVs, analysis files)
        print(f"uqcov {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
