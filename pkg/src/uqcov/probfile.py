"""Plain-CSV probability tables produced by external classifiers.

File grammar::

    # method=<m> dataset=<d> shift=<s> severity=<v>
    p0,p1,...,p{K-1},label
    <float>,...,<float>,<int>
    ...

The comment line comes first; its four ``key=value`` fields appear in that
order and values contain no whitespace. Rows must sum to 1 within 1e-4 and
are renormalized on load. Values are written with 17 significant digits.
"""

import csv
import re
from dataclasses import dataclass

import numpy as np

from .intervals import PROB_SUM_TOL
from .models.temperature import softmax

META_KEYS = ("method", "dataset", "shift", "severity")
_META_RE = re.compile(r"^#\s*method=(\S*)\s+dataset=(\S*)\s+shift=(\S*)\s+severity=(\S*)\s*$")


class ProbfileError(ValueError):
    """Base class; ``line`` is the 1-based file line (None if not row-specific)."""

    def __init__(self, path, message, line=None):
        where = f"{path}" if line is None else f"{path}:{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class HeaderError(ProbfileError):
    pass


class RowValueError(ProbfileError):
    pass


class RowSumError(ProbfileError):
    pass


class LabelRangeError(ProbfileError):
    pass


@dataclass(frozen=True)
class ProbabilityTable:
    probabilities: np.ndarray
    labels: np.ndarray
    method: str
    dataset: str
    shift: str
    severity: str  # kept verbatim; see ``severity_value``

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        y = np.asarray(self.labels)
        if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] < 1:
            raise ValueError("a probability table needs at least one row and one class")
        if y.shape != (p.shape[0],):
            raise ValueError("one label per row is required")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > PROB_SUM_TOL):
            raise ValueError("rows must sum to 1 within 1e-4")
        if np.any(y < 0) or np.any(y >= p.shape[1]):
            raise ValueError("labels out of range")
        for key in ("method", "dataset", "shift", "severity"):
            if re.search(r"\s", str(getattr(self, key))) or not str(getattr(self, key)):
                raise ValueError(f"{key} must be non-empty and contain no whitespace")

    @property
    def n(self):
        return self.probabilities.shape[0]

    @property
    def n_classes(self):
        return self.probabilities.shape[1]

    @property
    def severity_value(self):
        return float(self.severity)


def read_probfile(path, logits=False):
    """Load and validate a probability table.

    With ``logits=True`` the numeric columns are treated as logits and
    softmaxed row-wise; the row-sum check then does not apply.

    Raises
    ------
    HeaderError, RowValueError, RowSumError, LabelRangeError
        Each carries the offending 1-based line number where applicable.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        m = _META_RE.match(first.rstrip("\r\n"))
        if not m:
            raise HeaderError(path, "first line must be '# method=<m> dataset=<d> shift=<s> severity=<v>'", 1)
        meta = dict(zip(META_KEYS, m.groups()))
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise HeaderError(path, "missing column header", 2)
        header = [h.strip() for h in header]
        k = len(header) - 1
        if k < 1 or header != [f"p{i}" for i in range(k)] + ["label"]:
            raise HeaderError(path, f"header must be p0..p{{K-1}},label; got {','.join(header)}", 2)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=3):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != k + 1:
                raise RowValueError(path, f"expected {k + 1} fields, found {len(row)}", lineno)
            try:
                vals = [float(c) for c in row[:k]]
            except ValueError:
                raise RowValueError(path, "non-numeric probability", lineno) from None
            try:
                lab = int(row[k])
            except ValueError:
                raise RowValueError(path, f"label {row[k]!r} is not an integer", lineno) from None
            if not all(np.isfinite(vals)):
                raise RowValueError(path, "non-finite value", lineno)
            if not 0 <= lab < k:
                raise LabelRangeError(path, f"label {lab} outside [0, {k})", lineno)
            if not logits:
                if min(vals) < 0:
                    raise RowValueError(path, "negative probability", lineno)
                s = sum(vals)
                if abs(s - 1.0) > PROB_SUM_TOL:
                    raise RowSumError(path, f"row sums to {s!r}, outside 1 +/- {PROB_SUM_TOL}", lineno)
            rows.append(vals)
            labels.append(lab)
    if not rows:
        raise RowValueError(path, "table has no data rows")
    p = np.array(rows)
    p = softmax(p) if logits else p / p.sum(axis=1, keepdims=True)
    return ProbabilityTable(p, np.array(labels, dtype=np.int64), meta["method"], meta["dataset"], meta["shift"], meta["severity"])


def write_probfile(table, path):
    if table.n == 0:
        raise ValueError("refusing to write an empty table")
    k = table.n_classes
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# method={table.method} dataset={table.dataset} shift={table.shift} severity={table.severity}\n")
        fh.write(",".join([f"p{i}" for i in range(k)] + ["label"]) + "\n")
        for row, lab in zip(table.probabilities, table.labels):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(lab)}\n")
