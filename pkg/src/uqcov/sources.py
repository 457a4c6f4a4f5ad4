"""Materialize the small public datasets that ship inside PyPI wheels.

Writes UCI-style regression CSVs and an MNIST subset in IDX layout into a
directory, so the harness can run without network access to the original
archives::

    python -m uqcov.sources data/

Needs the ``data`` extra (mlxtend, scikit-learn). Real MNIST IDX files can be
dropped into ``<dir>/mnist`` under the same names instead.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .datasets import TabularDataset, write_idx, write_tabular

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

REGRESSION_SETS = ("boston", "autompg", "diabetes")


def _regression_arrays(name):
    if name == "boston":
        from mlxtend.data import boston_housing_data

        x, y = boston_housing_data()
    elif name == "autompg":
        from mlxtend.data import autompg_data

        x, y = autompg_data()
        x = x[:, :-1]  # trailing column is the car name, NaN after parsing
    elif name == "diabetes":
        from sklearn.datasets import load_diabetes

        x, y = load_diabetes(return_X_y=True, scaled=False)
    else:
        raise KeyError(name)
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def write_regression_sets(dest, names=REGRESSION_SETS):
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in names:
        x, y = _regression_arrays(name)
        header = [f"x{j}" for j in range(x.shape[1])] + ["target"]
        path = dest / f"{name}.csv"
        write_tabular(TabularDataset(x, y, name), path, header=header)
        paths[name] = path
    return paths


def write_mnist_subset(dest, n_test=1000, seed=0):
    """Split mlxtend's 5,000-image MNIST sample into stratified train/test IDX files."""
    from mlxtend.data import mnist_data

    x, y = mnist_data()
    pixels = np.clip(np.rint(x), 0, 255).astype(np.uint8).reshape(-1, 28, 28)
    y = y.astype(np.int64)
    rng = np.random.default_rng(seed)
    per_class = n_test // 10
    test_idx = []
    for c in range(10):
        members = np.flatnonzero(y == c)
        test_idx.extend(rng.choice(members, size=per_class, replace=False))
    test_mask = np.zeros(y.shape[0], dtype=bool)
    test_mask[np.asarray(test_idx)] = True
    train_idx = np.flatnonzero(~test_mask)
    test_idx = np.flatnonzero(test_mask)

    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    write_idx(pixels[train_idx], dest / MNIST_FILES["train_images"], dest / MNIST_FILES["train_labels"], y[train_idx])
    write_idx(pixels[test_idx], dest / MNIST_FILES["test_images"], dest / MNIST_FILES["test_labels"], y[test_idx])
    return {k: dest / v for k, v in MNIST_FILES.items()}


def materialize(dest):
    dest = Path(dest)
    out = {"regression": write_regression_sets(dest / "regression")}
    mnist_dir = dest / "mnist"
    if not all((mnist_dir / f).exists() for f in MNIST_FILES.values()):
        write_mnist_subset(mnist_dir)
    out["mnist"] = {k: mnist_dir / v for k, v in MNIST_FILES.items()}
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(prog="python -m uqcov.sources", description=__doc__.splitlines()[0])
    parser.add_argument("dest", type=Path)
    args = parser.parse_args(argv)
    out = materialize(args.dest)
    for name, path in out["regression"].items():
        print(f"{name}: {path}")
    print(f"mnist: {out['mnist']['train_images'].parent}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
