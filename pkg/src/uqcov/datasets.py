"""Tabular and image data ingestion, seeded splits, and standardization."""

import csv
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class TabularFormatError(ValueError):
    pass


class IdxFormatError(ValueError):
    pass


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


@dataclass(frozen=True)
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"features {self.features.shape} and labels {self.labels.shape} disagree on row count"
            )

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx])


@dataclass(frozen=True)
class ImageDataset:
    """Images of shape (n, h, w) or (n, h, w, c) with values in [0, 1]."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.images.ndim not in (3, 4):
            raise ValueError(f"images must be (n,h,w) or (n,h,w,c), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image and label counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, images=self.images[idx], labels=self.labels[idx])


@dataclass(frozen=True)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int | None = None


@dataclass(frozen=True)
class Standardizer:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    label_mean: float
    label_std: float

    def transform_features(self, x):
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_std

    def transform_labels(self, y):
        return (np.asarray(y, dtype=float) - self.label_mean) / self.label_std

    def inverse_labels(self, z):
        return np.asarray(z, dtype=float) * self.label_std + self.label_mean


# --------------------------------------------------------------------------
# tabular


def _parse_float(cell):
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_tabular(path, target_column=-1, name=None):
    """Read a comma-separated numeric file into a :class:`TabularDataset`.

    A first row containing any non-numeric cell is taken as a header.
    ``target_column`` is a header name or a (possibly negative) column index.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise TabularFormatError(f"{path}: no data rows")

    header = None
    if any(_parse_float(c) is None for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        first_line = 1
    if not rows:
        raise TabularFormatError(f"{path}: header but no data rows")

    width = len(header) if header is not None else len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise TabularFormatError(
                f"{path}: row {i + first_line} has {len(row)} cells, expected {width}"
            )
        for j, cell in enumerate(row):
            v = _parse_float(cell.strip())
            if v is None:
                raise TabularFormatError(
                    f"{path}: non-numeric value {cell!r} at row {i + first_line}, column {j + 1}"
                )
            values[i, j] = v

    if isinstance(target_column, str):
        if header is None or target_column not in header:
            raise TabularFormatError(f"{path}: target column {target_column!r} not found")
        target = header.index(target_column)
    else:
        target = int(target_column)
        if not -width <= target < width:
            raise TabularFormatError(f"{path}: target column index {target_column} out of range")
        target %= width

    keep = [j for j in range(width) if j != target]
    return TabularDataset(values[:, keep], values[:, target], name or path.stem)


def write_tabular(dataset, path, header=None):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for xrow, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in xrow] + [repr(float(y))])


# --------------------------------------------------------------------------
# IDX (MNIST binary layout)


def _read_idx(path, magic, ndim):
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than its magic number")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise IdxTruncatedError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", data[4:head])
    count = int(np.prod(dims))
    if len(data) - head < count:
        raise IdxTruncatedError(f"{path}: expected {count} payload bytes, found {len(data) - head}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=head).reshape(dims)


def load_idx(images_path, labels_path, n_classes=10):
    """Load an IDX image/label pair, scaling pixel bytes to [0, 1]."""
    raw = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1).astype(np.int64)
    if raw.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{raw.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}"
        )
    return ImageDataset(raw.astype(np.float64) / 255.0, labels, int(n_classes))


def write_idx(dataset_or_bytes, images_path, labels_path, labels=None):
    """Write images (uint8 array or an :class:`ImageDataset`) and labels as IDX."""
    if isinstance(dataset_or_bytes, ImageDataset):
        pixels = np.rint(np.clip(dataset_or_bytes.images, 0, 1) * 255).astype(np.uint8)
        labels = dataset_or_bytes.labels
    else:
        pixels = np.asarray(dataset_or_bytes, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if pixels.ndim != 3:
        raise ValueError("IDX image files hold (n, h, w) arrays")
    Path(images_path).write_bytes(
        struct.pack(">IIII", IDX_IMAGES_MAGIC, *pixels.shape) + pixels.tobytes()
    )
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


# --------------------------------------------------------------------------
# splits


def make_splits(n, seed, fractions=(0.72, 0.18, 0.10)):
    """Seeded shuffled partition into train/val/test.

    Train and validation sizes are ``floor(n * fraction)``; the test split
    takes the remainder.
    """
    if n < 3:
        raise ValueError(f"need at least 3 rows to split, got {n}")
    fr = [float(f) for f in fractions]
    if len(fr) != 3 or min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    n_train = int(math.floor(n * fr[0] + 1e-9))
    n_val = int(math.floor(n * fr[1] + 1e-9))
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ValueError(f"fractions {fractions} leave an empty split for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitSpec(perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :], seed)


def load_split_files(train_path, val_path, test_path):
    parts = []
    for p in (train_path, val_path, test_path):
        text = Path(p).read_text(encoding="utf-8").split()
        parts.append(np.array([int(t) for t in text], dtype=np.int64))
    seen = np.concatenate(parts)
    if np.unique(seen).size != seen.size:
        raise ValueError("split index files overlap")
    return SplitSpec(*parts, seed=None)


def write_split_files(split, train_path, val_path, test_path):
    for idx, p in zip((split.train, split.val, split.test), (train_path, val_path, test_path)):
        Path(p).write_text("".join(f"{int(i)}\n" for i in idx), encoding="utf-8")


# --------------------------------------------------------------------------
# standardization


def fit_standardizer(train):
    """Per-feature and label location/scale from training rows (n-1 denominator).

    Constant features get a scale of 1 so they are centred but not divided by
    zero.
    """
    if len(train) < 2:
        raise ValueError("standardizer needs at least two training rows")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0, ddof=1)
    std = np.where(std > 0, std, 1.0)
    label_std = float(train.labels.std(ddof=1))
    return Standardizer(mean, std, float(train.labels.mean()), label_std if label_std > 0 else 1.0)


def apply(standardizer, dataset):
    """Standardize features; labels stay in original units."""
    return replace(dataset, features=standardizer.transform_features(dataset.features))
