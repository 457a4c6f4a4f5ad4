"""Experiment configuration: flat ``key = value`` text with one section per experiment.

Recognized sections and keys are listed in :data:`SCHEMA`; anything else is
a :class:`ConfigError`. Relative paths resolve against the config file's
directory. Lists are comma separated; seed lists also accept ``a-b`` ranges.
"""

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from ..models.cnn import VARIANTS
from ..models.mlp import DEFAULT_SPACE, validate_space
from ..shift import ROTATION_DEGREES

REGRESSION_METHODS = ("ensemble", "dropout", "ll_dropout", "svi", "ll_svi", "gp", "linear_regression")


class ConfigError(ValueError):
    pass


@dataclass
class GeneralConfig:
    alpha: float = 0.05
    seed: int = 0
    out: str = "results"
    threads: int = 1


@dataclass
class RegressConfig:
    datasets: list = field(default_factory=list)
    target_column: int = -1
    methods: list = field(default_factory=lambda: list(REGRESSION_METHODS))
    seeds: list = field(default_factory=lambda: list(range(20)))
    fractions: tuple = (0.72, 0.18, 0.10)
    trials: int = 100
    ensemble_size: int = 40
    dropout_passes: int = 200
    svi_samples: int = 100
    gp_optimize: bool = True
    gp_cap: int = 2000
    search: dict = field(default_factory=lambda: dict(DEFAULT_SPACE))


@dataclass
class MnistConfig:
    data_dir: str = ""
    variants: list = field(default_factory=lambda: list(VARIANTS))
    rotations: list = field(default_factory=lambda: list(ROTATION_DEGREES))
    roll_step: int = 2
    roll_max: int = 28
    epochs: int = 12
    learning_rate: float = 2e-3
    batch_size: int = 64
    dropout: float = 0.1
    mc_passes: int = 32
    members: int = 5
    val_fraction: float = 0.1


@dataclass
class SetcovConfig:
    files: list = field(default_factory=list)
    logits: bool = False


@dataclass
class AnalyzeConfig:
    reports: list = field(default_factory=list)
    group_by: str = "severity"


@dataclass
class ReportConfig:
    analysis: str = ""


@dataclass
class ExperimentConfig:
    general: GeneralConfig = field(default_factory=GeneralConfig)
    regress: RegressConfig = field(default_factory=RegressConfig)
    mnist: MnistConfig = field(default_factory=MnistConfig)
    setcov: SetcovConfig = field(default_factory=SetcovConfig)
    analyze: AnalyzeConfig = field(default_factory=AnalyzeConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def digest(self, section):
        """Short stable hash of one section plus the general settings that affect it."""
        payload = {"general": {"alpha": self.general.alpha, "seed": self.general.seed},
                   section: asdict(getattr(self, section))}
        return config_hash(payload)


def config_hash(obj):
    text = json.dumps(obj, sort_keys=True, default=list, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# --------------------------------------------------------------------------
# value parsers


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return s.strip()


def _list(s):
    return [p.strip() for p in s.split(",") if p.strip()]


def _int_list(s):
    out = []
    for part in _list(s):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(s):
    return [float(p) for p in _list(s)]


def _pair(conv):
    def parse(s):
        vals = [conv(p) for p in _list(s)]
        if len(vals) != 2:
            raise ValueError(f"expected two values, got {s!r}")
        return tuple(vals)

    return parse


def _choices(conv):
    def parse(s):
        vals = tuple(conv(p) for p in _list(s))
        if not vals:
            raise ValueError("empty choice list")
        return vals

    return parse


_PATH = "path"
_PATHS = "paths"

SCHEMA = {
    "general": {"alpha": _float, "seed": _int, "out": _PATH, "threads": _int},
    "regress": {
        "datasets": _PATHS, "target_column": _int, "methods": _list, "seeds": _int_list,
        "fractions": _float_list, "trials": _int, "ensemble_size": _int, "dropout_passes": _int,
        "svi_samples": _int, "gp_optimize": _bool, "gp_cap": _int,
        "search_layers": _choices(int), "search_units": _pair(float), "search_learning_rate": _pair(float),
        "search_dropout": _pair(float), "search_batch_size": _choices(int), "search_epochs": _pair(int),
    },
    "mnist-shift": {
        "data_dir": _PATH, "variants": _list, "rotations": _float_list, "roll_step": _int, "roll_max": _int,
        "epochs": _int, "learning_rate": _float, "batch_size": _int, "dropout": _float, "mc_passes": _int,
        "members": _int, "val_fraction": _float,
    },
    "setcov": {"files": _PATHS, "logits": _bool},
    "analyze": {"reports": _PATHS, "group_by": _str},
    "report": {"analysis": _PATH},
}

_TARGET = {"general": "general", "regress": "regress", "mnist-shift": "mnist", "setcov": "setcov",
           "analyze": "analyze", "report": "report"}


def _resolve(base, p):
    p = os.path.expanduser(p.strip())
    return p if os.path.isabs(p) or base is None else os.path.normpath(os.path.join(base, p))


def parse_config_text(text, base_dir=None, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=None, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]; expected one of {sorted(SCHEMA)}")
        target = getattr(cfg, _TARGET[section])
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{source}: [{section}] unknown key {key!r}")
            try:
                if conv is _PATH:
                    value = _resolve(base_dir, raw)
                elif conv is _PATHS:
                    value = [_resolve(base_dir, p) for p in _list(raw)]
                else:
                    value = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key}: {exc}") from None
            if key.startswith("search_"):
                target.search[key[len("search_"):]] = value
            elif key == "fractions":
                target.fractions = tuple(value)
            else:
                setattr(target, key, value)
    validate(cfg, source)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)), str(path))


def validate(cfg, source="<config>"):
    g = cfg.general
    if not 0.0 < g.alpha < 1.0:
        raise ConfigError(f"{source}: alpha must lie in (0, 1), got {g.alpha}")
    if g.threads < 1:
        raise ConfigError(f"{source}: threads must be positive")
    r = cfg.regress
    unknown = [m for m in r.methods if m not in REGRESSION_METHODS]
    if unknown:
        raise ConfigError(f"{source}: unknown regression methods {unknown}; expected {list(REGRESSION_METHODS)}")
    for name in ("trials", "ensemble_size", "dropout_passes", "svi_samples", "gp_cap"):
        if getattr(r, name) < 1:
            raise ConfigError(f"{source}: regress {name} must be positive")
    if r.ensemble_size < 2:
        raise ConfigError(f"{source}: ensemble_size must be at least 2")
    if r.svi_samples < 2:
        raise ConfigError(f"{source}: svi_samples must be at least 2")
    if len(r.fractions) != 3 or any(f <= 0 for f in r.fractions) or abs(sum(r.fractions) - 1) > 1e-9:
        raise ConfigError(f"{source}: fractions must be three positive numbers summing to 1")
    try:
        validate_space({k: v for k, v in r.search.items() if k in DEFAULT_SPACE})
    except ValueError as exc:
        raise ConfigError(f"{source}: search space: {exc}") from None
    m = cfg.mnist
    bad = [v for v in m.variants if v not in VARIANTS]
    if bad:
        raise ConfigError(f"{source}: unknown classifier variants {bad}; expected {list(VARIANTS)}")
    for name in ("roll_step", "roll_max", "batch_size", "mc_passes", "members"):
        if getattr(m, name) < 1:
            raise ConfigError(f"{source}: mnist-shift {name} must be positive")
    if m.epochs < 0 or not 0 <= m.dropout < 1 or not 0 < m.val_fraction < 1:
        raise ConfigError(f"{source}: mnist-shift epochs >= 0, dropout in [0, 1), val_fraction in (0, 1)")
    if cfg.analyze.group_by not in ("severity", "shift_severity"):
        raise ConfigError(f"{source}: analyze group_by must be 'severity' or 'shift_severity'")
