import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from uqcov.datasets import ImageDataset
from uqcov.harness import cli, regress
from uqcov.harness.analyze import AnalysisError, analyze_reports, run_analyze, write_analysis
from uqcov.harness.config import ConfigError, ExperimentConfig, config_hash, load_config, parse_config_text
from uqcov.harness.mnist import run_mnist_shift, shift_levels
from uqcov.harness.regress import run_regress, summarize
from uqcov.harness.report import load_analysis, svg_plot, write_report
from uqcov.harness.setcov import run_setcov
from uqcov.metrics import CoverageReport, read_reports_csv
from uqcov.shift import roll_distance

SVG = "{http://www.w3.org/2000/svg}"


def _linear_csv(path, n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, n)
    y = 2 * x + rng.normal(0, 0.5, n)
    np.savetxt(path, np.column_stack([x, y]), delimiter=",", header="x,y", comments="")
    return path


def _cfg(text, tmp_path):
    return parse_config_text(text, base_dir=str(tmp_path))


# --------------------------------------------------------------------------
# config


def test_config_defaults():
    cfg = parse_config_text("")
    assert cfg.general.alpha == 0.05
    assert cfg.regress.trials == 100
    assert cfg.regress.ensemble_size == 40
    assert cfg.regress.dropout_passes == 200
    assert cfg.regress.seeds == list(range(20))


def test_config_parses_sections(tmp_path):
    cfg = _cfg("""
[general]
alpha = 0.1
seed = 7
[regress]
datasets = a.csv, /abs/b.csv
methods = gp, linear_regression
seeds = 0-3
search_epochs = 5, 10
search_layers = 1, 2
[mnist-shift]
rotations = 0, 45
""", tmp_path)
    assert cfg.general.alpha == 0.1 and cfg.general.seed == 7
    assert cfg.regress.datasets == [str(tmp_path / "a.csv"), "/abs/b.csv"]
    assert cfg.regress.methods == ["gp", "linear_regression"]
    assert cfg.regress.seeds == [0, 1, 2, 3]
    assert cfg.regress.search["epochs"] == (5, 10)
    assert cfg.regress.search["layers"] == (1, 2)
    assert cfg.mnist.rotations == [0.0, 45.0]


@pytest.mark.parametrize("text, fragment", [
    ("[regress]\ntrails = 5\n", "unknown key 'trails'"),
    ("[regresss]\n", "unknown section"),
    ("[general]\nalpha = 1.5\n", "alpha"),
    ("[general]\nalpha = 0\n", "alpha"),
    ("[regress]\nmethods = gp, magic\n", "unknown regression methods"),
    ("[regress]\ntrials = 0\n", "trials"),
    ("[regress]\nfractions = 0.5, 0.5, 0.5\n", "fractions"),
    ("[general]\nseed = x\n", "seed"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.cfg")


def test_config_hash_stable_and_sensitive():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 12


# --------------------------------------------------------------------------
# regress


def test_regress_linear_nominal_coverage(tmp_path):
    path = _linear_csv(tmp_path / "lin.csv", 10_000)
    cfg = _cfg(f"[regress]\ndatasets = {path}\nmethods = linear_regression\nseeds = 0\n", tmp_path)
    (r,) = run_regress(cfg)
    assert r.status == "ok" and r.n == 1000
    se = math.sqrt(0.95 * 0.05 / r.n)
    assert abs(r.coverage - 0.95) <= 3 * se


def test_regress_gp_on_gp_prior_data(tmp_path):
    # draws from a GP prior; ML-II recovers the generating hyperparameters
    rng = np.random.default_rng(3)
    n = 1000
    x = rng.uniform(-3, 3, (n, 1))
    k = np.exp(-0.5 * (x - x.T) ** 2 / 0.8**2) + 1e-10 * np.eye(n)
    f = np.linalg.cholesky(k) @ rng.standard_normal(n)
    y = f + rng.normal(0, 0.2, n)
    path = tmp_path / "gp.csv"
    np.savetxt(path, np.column_stack([x[:, 0], y]), delimiter=",", header="x,y", comments="")
    cfg = _cfg(f"[regress]\ndatasets = {path}\nmethods = gp\nseeds = 0, 1, 2\n", tmp_path)
    reports = run_regress(cfg)
    hits = sum(r.coverage * r.n for r in reports)
    total = sum(r.n for r in reports)
    se = math.sqrt(0.95 * 0.05 / total)
    assert abs(hits / total - 0.95) <= 3 * se


def test_regress_empty_method_list(tmp_path):
    path = _linear_csv(tmp_path / "lin.csv", 100)
    cfg = _cfg(f"[regress]\ndatasets = {path}\nseeds = 0\n", tmp_path)
    cfg.regress.methods = []
    with pytest.raises(ConfigError, match="method list is empty"):
        run_regress(cfg)


def test_regress_no_datasets():
    with pytest.raises(ConfigError, match="no datasets"):
        run_regress(ExperimentConfig())


def test_regress_unreadable_dataset(tmp_path):
    cfg = _cfg("[regress]\ndatasets = missing.csv\nseeds = 0\n", tmp_path)
    with pytest.raises(ConfigError, match="cannot load"):
        run_regress(cfg)


TINY = """
[regress]
datasets = {path}
methods = {methods}
seeds = 0, 1
trials = 2
ensemble_size = 2
dropout_passes = 20
svi_samples = 20
search_epochs = 5, 10
search_units = 8, 16
"""

ALL_METHODS = "ensemble, dropout, ll_dropout, svi, ll_svi, gp, linear_regression"


@pytest.fixture(scope="module")
def tiny_data(tmp_path_factory):
    d = tmp_path_factory.mktemp("tiny")
    return _linear_csv(d / "lin.csv", 150)


@pytest.mark.filterwarnings("ignore:only 2 samples per point")
def test_regress_rows_carry_rerun_metadata(tiny_data, tmp_path):
    cfg = _cfg(TINY.format(path=tiny_data, methods=ALL_METHODS), tmp_path)
    reports = run_regress(cfg, str(tmp_path))
    assert [r.method for r in reports[:7]] == [m.strip() for m in ALL_METHODS.split(",")]
    assert all(r.status == "ok" for r in reports)
    assert [r.seed for r in reports] == [0] * 7 + [1] * 7
    assert len({r.config_hash for r in reports}) == len(reports)
    assert (tmp_path / "search" / "lin_seed0.json").exists()


@pytest.mark.filterwarnings("ignore:only 2 samples per point")
def test_regress_alpha_half_narrower_for_every_method(tiny_data, tmp_path):
    text = TINY.format(path=tiny_data, methods=ALL_METHODS)
    wide = _cfg(text, tmp_path)
    narrow = _cfg(text.replace("[regress]", "[general]\nalpha = 0.5\n[regress]"), tmp_path)
    mean_width = {}
    for name, cfg in (("wide", wide), ("narrow", narrow)):
        rows = summarize(run_regress(cfg))
        mean_width[name] = {row[2]: row[6] for row in rows if row[0] == "dataset"}
    for m in mean_width["wide"]:
        assert mean_width["narrow"][m] < mean_width["wide"][m], m


def test_regress_deterministic_across_threads(tiny_data, tmp_path):
    cfg = _cfg(TINY.format(path=tiny_data, methods="dropout, linear_regression"), tmp_path)
    a = run_regress(cfg, threads=1)
    b = run_regress(cfg, threads=2)
    assert a == b


def test_regress_failed_cell_recorded(tiny_data, tmp_path, monkeypatch):
    real = regress._interval

    def flaky(method, *args):
        if method == "gp":
            raise RuntimeError("boom")
        return real(method, *args)

    monkeypatch.setattr(regress, "_interval", flaky)
    cfg = _cfg(TINY.format(path=tiny_data, methods="gp, linear_regression"), tmp_path)
    reports = run_regress(cfg)
    assert [(r.method, r.status) for r in reports] == [
        ("gp", "failed"), ("linear_regression", "ok"), ("gp", "failed"), ("linear_regression", "ok")]
    assert reports[0].coverage is None


def test_summarize_means_and_sds():
    def rep(d, m, c, w, seed):
        return CoverageReport(m, d, "none", 0.0, 0.05, c, w, n=10, seed=seed)

    reports = [rep("a", "x", 0.9, 1.0, 0), rep("a", "x", 1.0, 3.0, 1), rep("b", "x", 0.8, 2.0, 0),
               CoverageReport("x", "b", "none", 0.0, 0.05, None, None, n=10, seed=1, status="failed")]
    rows = summarize(reports)
    assert rows[0] == ("dataset", "a", "x", 2, pytest.approx(0.95), pytest.approx(math.sqrt(0.005)),
                       2.0, pytest.approx(math.sqrt(2.0)))
    assert rows[1][:4] == ("dataset", "b", "x", 1) and math.isnan(rows[1][5])
    assert rows[2][:5] == ("all", "", "x", 2, pytest.approx(0.875))
    assert rows[2][6] == pytest.approx(2.0)


# --------------------------------------------------------------------------
# CLI


def test_cli_regress_byte_identical(tiny_data, tmp_path):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(TINY.format(path=tiny_data, methods="dropout, linear_regression"))
    assert cli.main(["regress", "--config", str(cfg_path), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["--config", str(cfg_path), "--out", str(tmp_path / "b"), "regress"]) == 0
    for name in ("regress.csv", "regress_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "regress.csv").read_text().splitlines()[0]
    assert header.startswith("method,dataset,shift,severity,alpha,coverage,width,brier,ece,accuracy,n,seed,status")


def test_cli_global_flags_either_side(tiny_data, tmp_path):
    base = ["--datasets", str(tiny_data), "--methods", "linear_regression"]
    assert cli.main(["--alpha", "0.2", "--seed", "3", "--out", str(tmp_path / "a"), "regress", *base]) == 0
    assert cli.main(["regress", *base, "--alpha", "0.2", "--seed", "3", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "regress.csv").read_text()
    assert a == (tmp_path / "b" / "regress.csv").read_text()
    assert ",0.2," in a.splitlines()[1]


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[regress]\nbogus = 1\n")
    assert cli.main(["regress", "--config", str(bad)]) == 2
    assert "unknown key 'bogus'" in capsys.readouterr().err
    assert cli.main(["regress", "--alpha", "2"]) == 2


def test_cli_failed_cell_exit_code(tiny_data, tmp_path, monkeypatch):
    def broken(method, *args):
        raise RuntimeError("boom")

    monkeypatch.setattr(regress, "_interval", broken)
    rc = cli.main(["regress", "--datasets", str(tiny_data), "--methods", "linear_regression",
                   "--out", str(tmp_path)])
    assert rc == 1
    rows = read_reports_csv(tmp_path / "regress.csv")
    assert {r.status for r in rows} == {"failed"}


# --------------------------------------------------------------------------
# setcov


def _probfile(path, rows, labels, method="m", shift="none", severity="0"):
    k = len(rows[0])
    with open(path, "w") as fh:
        fh.write(f"# method={method} dataset=d shift={shift} severity={severity}\n")
        fh.write(",".join(f"p{j}" for j in range(k)) + ",label\n")
        for r, y in zip(rows, labels):
            fh.write(",".join(repr(v) for v in r) + f",{y}\n")
    return path


def test_setcov_one_hot_correct(tmp_path):
    rows = np.eye(4)[[0, 1, 2, 3, 1]]
    (r,) = run_setcov([_probfile(tmp_path / "a.csv", rows.tolist(), [0, 1, 2, 3, 1])], 0.05)
    assert (r.coverage, r.width, r.brier, r.ece, r.accuracy) == (1.0, 1.0, 0.0, 0.0, 1.0)


def test_setcov_uniform_ten_classes(tmp_path):
    rows = np.full((6, 10), 0.1).tolist()
    (r,) = run_setcov([_probfile(tmp_path / "u.csv", rows, [0, 3, 9, 2, 2, 5])], 0.05)
    assert r.width == 10.0 and r.coverage == 1.0


def test_setcov_hand_built_four_rows(tmp_path):
    rows = [[0.7, 0.2, 0.1], [0.55, 0.35, 0.1], [0.1, 0.85, 0.05], [0.42, 0.33, 0.25]]
    labels = [0, 2, 1, 0]
    (r,) = run_setcov([_probfile(tmp_path / "h.csv", rows, labels)], 0.2)
    # sets at 1 - alpha = 0.8: {0,1}, {0,1}, {1}, {0,1,2}; row 2 misses its label
    assert r.coverage == 0.75
    assert r.width == 2.0
    assert r.accuracy == 0.75
    assert r.brier == pytest.approx((0.14 + 1.235 + 0.035 + 0.5078) / 4, abs=1e-12)
    # one row per confidence bin: ECE is the mean |confidence - correct|
    assert r.ece == pytest.approx((0.3 + 0.55 + 0.15 + 0.58) / 4, abs=1e-12)


def test_setcov_pools_and_groups(tmp_path):
    f1 = _probfile(tmp_path / "1.csv", [[1.0, 0.0]], [0])
    f2 = _probfile(tmp_path / "2.csv", [[1.0, 0.0]], [1])
    f3 = _probfile(tmp_path / "3.csv", [[0.0, 1.0]], [1], severity="2")
    reports = run_setcov([f1, f2, f3], 0.05)
    assert [(r.severity, r.n, r.coverage) for r in reports] == [(0.0, 2, 0.5), (2.0, 1, 1.0)]


def test_setcov_no_files():
    with pytest.raises(ConfigError):
        run_setcov([], 0.05)


def test_cli_setcov_bad_file_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# method=m dataset=d shift=none severity=0\np0,p1,label\n0.9,0.9,0\n")
    assert cli.main(["setcov", str(bad), "--out", str(tmp_path)]) == 2


# --------------------------------------------------------------------------
# analyze


def _rep(method, width, coverage, severity=0.0, seed=0, shift="none", dataset="d", brier=None, ece=None):
    return CoverageReport(method, dataset, shift, severity, 0.05, coverage, width, brier, ece, n=100, seed=seed)


def _dominance_reports():
    # line: coverage = 0.5 + 0.1 * width; A sits 0.02 above, B 0.02 below
    out = []
    for sev in (0.0, 1.0, 2.0):
        for seed, w in enumerate((1.0, 2.0, 3.0, 4.0)):
            out.append(_rep("A", w, 0.5 + 0.1 * w + 0.02, sev, seed))
            out.append(_rep("B", w, 0.5 + 0.1 * w - 0.02, sev, seed))
    return out


def test_analyze_dominance():
    res = analyze_reports(_dominance_reports())
    assert [lv["level"] for lv in res["levels"]] == ["0.0", "1.0", "2.0"]
    for lv in res["levels"]:
        assert lv["fractions"] == {"A": 1.0, "B": 0.0}
        assert lv["line"] == [pytest.approx(0.5), pytest.approx(0.1)]


def test_analyze_single_method_error():
    with pytest.raises(AnalysisError, match="at least two methods"):
        analyze_reports([_rep("A", 1.0, 0.9), _rep("A", 2.0, 0.95, seed=1)])


def test_analyze_level_without_width_spread():
    with pytest.raises(AnalysisError, match="distinct widths"):
        analyze_reports([_rep("A", 1.0, 0.9), _rep("B", 1.0, 0.95)])


def test_analyze_ignores_failed_rows():
    reports = _dominance_reports() + [CoverageReport("C", "d", "none", 0.0, 0.05, None, None, n=1, status="failed")]
    assert analyze_reports(reports)["methods"] == ["A", "B"]


def test_analyze_rank_tie_rule():
    reports = [
        _rep("A", 1.0, 0.95, brier=0.1, ece=0.02),
        _rep("B", 2.0, 0.95, brier=0.3, ece=0.02),
        _rep("C", 3.0, 0.80, brier=0.2, ece=0.02),
        _rep("D", 4.0, 0.99, brier=0.1, ece=0.01),
    ]
    res = analyze_reports(reports)
    ranks = {(r["metric"], r["method"]): r["rank"] for r in res["ranks"]}
    # coverage: D best, A and B tie for 2nd and 3rd, C last
    assert [ranks[("coverage", m)] for m in "ABCD"] == [2.5, 2.5, 4.0, 1.0]
    assert [ranks[("brier", m)] for m in "ABCD"] == [1.5, 4.0, 3.0, 1.5]
    assert [ranks[("ece", m)] for m in "ABCD"] == [3.0, 3.0, 3.0, 1.0]


def test_analyze_mean_ranks_over_cells():
    reports = [_rep("A", 1.0, 0.9, seed=0), _rep("B", 2.0, 0.8, seed=0),
               _rep("A", 1.5, 0.7, seed=1), _rep("B", 2.5, 0.8, seed=1)]
    res = analyze_reports(reports)
    means = {(r["metric"], r["method"]): r["mean_rank"] for r in res["mean_ranks"]}
    assert means[("coverage", "A")] == 1.5 and means[("coverage", "B")] == 1.5
    assert ("brier", "A") not in means


def test_analyze_shift_severity_grouping():
    reports = []
    for shift in ("rotation", "roll"):
        for seed, w in enumerate((1.0, 2.0)):
            reports.append(_rep("A", w, 0.9, 1.0, seed, shift))
            reports.append(_rep("B", w + 1, 0.8, 1.0, seed, shift))
    res = analyze_reports(reports, group_by="shift_severity")
    assert sorted(lv["level"] for lv in res["levels"]) == ["roll:1.0", "rotation:1.0"]
    assert len(analyze_reports(reports)["levels"]) == 1


def test_analyze_outputs_round_trip(tmp_path):
    res = analyze_reports(_dominance_reports())
    write_analysis(res, tmp_path)
    text = (tmp_path / "analysis_fractions.csv").read_text().splitlines()
    assert text[0] == "level,method,fraction_above,n_points,intercept,slope"
    assert text[1].startswith("0.0,A,1.0,4,")
    assert json.loads((tmp_path / "analysis.json").read_text())["levels"][0]["fractions"] == {"A": 1.0, "B": 0.0}
    assert (tmp_path / "analysis_ranks.csv").exists() and (tmp_path / "analysis_mean_ranks.csv").exists()


def test_cli_analyze_and_report(tmp_path):
    from uqcov.metrics import write_reports_csv

    src = tmp_path / "r.csv"
    write_reports_csv(_dominance_reports(), src)
    assert cli.main(["analyze", str(src), "--out", str(tmp_path)]) == 0
    assert run_analyze([src])["levels"][0]["fractions"] == {"A": 1.0, "B": 0.0}
    assert cli.main(["report", str(tmp_path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "figures" / "coverage_width_0.0.svg").exists()
    single = tmp_path / "one.csv"
    write_reports_csv([_rep("A", 1.0, 0.9)], single)
    assert cli.main(["analyze", str(single), "--out", str(tmp_path / "x")]) == 2


# --------------------------------------------------------------------------
# report


def _parse(svg):
    return ET.fromstring(svg)


def test_svg_empty_series_axes_only():
    root = _parse(svg_plot({}, "empty", "x", "y", hline=0.95))
    assert root.tag == f"{SVG}svg"
    assert len(root.findall(f"{SVG}line[@class='axis']")) == 2
    assert root.findall(f"{SVG}circle") == []
    assert root.findall(f"{SVG}line[@class='reference']") == []


def test_svg_three_points_affine():
    pts = [(0.5, 0.91), (2.0, 0.97), (3.5, 0.99)]
    root = _parse(svg_plot({"svi": pts}, "t", "width", "coverage", hline=0.95))
    circles = root.findall(f"{SVG}circle[@class='marker']")
    assert len(circles) == 3
    cx = [float(c.get("cx")) for c in circles]
    cy = [float(c.get("cy")) for c in circles]
    # an affine map fixed by the first two points predicts the third (3-decimal rounding)
    for data, pix in (([p[0] for p in pts], cx), ([p[1] for p in pts], cy)):
        scale = (pix[1] - pix[0]) / (data[1] - data[0])
        assert pix[2] == pytest.approx(pix[0] + scale * (data[2] - data[0]), abs=2e-3 * (1 + abs(scale)))
    # the 0.95 reference line sits where the same map sends 0.95
    ref = root.find(f"{SVG}line[@class='reference']")
    scale_y = (cy[1] - cy[0]) / (pts[1][1] - pts[0][1])
    assert float(ref.get("y1")) == pytest.approx(cy[0] + scale_y * (0.95 - pts[0][1]), abs=0.01)
    assert scale_y < 0  # larger coverage is drawn higher


def test_svg_deterministic():
    series = {"a": [(1, 0.9), (2, 0.95)], "b": [(1.5, 0.8)]}
    assert svg_plot(series, "t", "x", "y", line=(0.8, 0.05)) == svg_plot(series, "t", "x", "y", line=(0.8, 0.05))


def test_write_report_files_and_determinism(tmp_path):
    reports = _dominance_reports() + [
        _rep("A", 1.0, 0.9, 15.0, 0, "rotation"), _rep("B", 2.0, 0.8, 15.0, 0, "rotation"),
        _rep("A", 1.1, 0.9, 15.0, 1, "rotation"), _rep("B", 2.2, 0.8, 15.0, 1, "rotation"),
    ]
    res = json.loads(json.dumps(analyze_reports(reports)))
    names = write_report(res, tmp_path / "one")
    write_report(res, tmp_path / "two")
    assert "coverage_d_rotation.svg" in names and "width_d_rotation.svg" in names
    assert "coverage_width_15.0.svg" in names
    for n in names:
        assert (tmp_path / "one" / n).read_bytes() == (tmp_path / "two" / n).read_bytes()
        _parse((tmp_path / "one" / n).read_text())


def test_load_analysis_malformed(tmp_path):
    bad = tmp_path / "analysis.json"
    bad.write_text("{\"levels\": []}")
    with pytest.raises(ValueError, match="not an analysis file"):
        load_analysis(tmp_path)
    bad.write_text("{oops")
    with pytest.raises(ValueError, match="cannot read"):
        load_analysis(bad)
    assert cli.main(["report", str(bad), "--out", str(tmp_path)]) == 2


# --------------------------------------------------------------------------
# mnist shift


@pytest.mark.parametrize("s", range(0, 29))
def test_roll_distance_symmetry(s):
    assert roll_distance(s, 28) == roll_distance(28 - s, 28) == min(s, 28 - s)


def test_shift_levels_default_schedule():
    levels = shift_levels(ExperimentConfig().mnist, 28)
    assert levels[0][:2] == ("none", 0.0)
    rot = [v for s, v, _ in levels if s == "rotation"]
    roll = [v for s, v, _ in levels if s == "roll"]
    assert len(rot) == 12
    assert roll == [float(s) for s in range(2, 29, 2)]


def _toy_images(n, seed):
    # class c is a bright 4x4 block at one of four positions
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, n)
    images = rng.uniform(0, 0.1, (n, 16, 16))
    for i, c in enumerate(labels):
        r, col = divmod(int(c), 2)
        images[i, 2 + 8 * r:6 + 8 * r, 2 + 8 * col:6 + 8 * col] = 1.0
    return ImageDataset(images, labels, 4)


def _mnist_cfg(variants):
    cfg = ExperimentConfig()
    cfg.mnist.variants = variants
    cfg.mnist.rotations = [0.0, 90.0]
    cfg.mnist.roll_step = 4
    cfg.mnist.epochs = 2
    cfg.mnist.mc_passes = 4
    cfg.mnist.members = 2
    return cfg


def test_mnist_shift_toy_run():
    data = (_toy_images(300, 0), _toy_images(100, 1))
    reports, corr = run_mnist_shift(_mnist_cfg(["vanilla", "dropout"]), data)
    assert set(corr) == {"vanilla", "dropout"}
    for variant in ("vanilla", "dropout"):
        rows = [r for r in reports if r.method == variant]
        assert [(r.shift, r.severity) for r in rows] == [
            ("none", 0.0), ("rotation", 0.0), ("rotation", 90.0),
            ("roll", 4.0), ("roll", 8.0), ("roll", 12.0), ("roll", 16.0)]
        clean, rot0 = rows[0], rows[1]
        assert (clean.coverage, clean.width, clean.brier) == (rot0.coverage, rot0.width, rot0.brier)
        # a full roll of the image width is the identity
        assert (rows[-1].coverage, rows[-1].width) == (clean.coverage, clean.width)
        assert all(r.status == "ok" and r.n == 100 for r in rows)


def test_mnist_shift_failed_variant(monkeypatch):
    import uqcov.harness.mnist as mn

    def broken(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(mn, "train_classifier", broken)
    reports, corr = run_mnist_shift(_mnist_cfg(["vanilla"]), (_toy_images(50, 0), _toy_images(20, 1)))
    assert {r.status for r in reports} == {"failed"}
    assert math.isnan(corr["vanilla"])


def test_mnist_shift_missing_data(tmp_path):
    cfg = _mnist_cfg(["vanilla"])
    with pytest.raises(ConfigError, match="data_dir"):
        run_mnist_shift(cfg)
    cfg.mnist.data_dir = str(tmp_path)
    with pytest.raises(ConfigError, match="missing IDX"):
        run_mnist_shift(cfg)
    assert cli.main(["mnist-shift", "--data-dir", str(tmp_path), "--out", str(tmp_path)]) == 2
