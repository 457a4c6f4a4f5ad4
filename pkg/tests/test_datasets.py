import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqcov import datasets as ds


@pytest.fixture
def three_row_csv(tmp_path):
    body = "1.0,2.0,3.5\n4.0,5.0,6.5\n7.0,8.0,9.5\n"
    plain = tmp_path / "plain.csv"
    plain.write_text(body)
    headed = tmp_path / "headed.csv"
    headed.write_text("a,b,y\n" + body)
    return plain, headed


class TestLoadTabular:
    def test_values(self, three_row_csv):
        plain, _ = three_row_csv
        d = ds.load_tabular(plain, target_column=-1)
        np.testing.assert_array_equal(d.features, [[1, 2], [4, 5], [7, 8]])
        np.testing.assert_array_equal(d.labels, [3.5, 6.5, 9.5])

    def test_header_equivalent(self, three_row_csv):
        plain, headed = three_row_csv
        a = ds.load_tabular(plain, target_column=2)
        b = ds.load_tabular(headed, target_column="y")
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_target_in_middle(self, three_row_csv):
        plain, _ = three_row_csv
        d = ds.load_tabular(plain, target_column=0)
        np.testing.assert_array_equal(d.labels, [1, 4, 7])
        np.testing.assert_array_equal(d.features[:, 0], [2, 5, 8])

    def test_concrete_shaped_file(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 100, size=(1030, 9))
        path = tmp_path / "concrete.csv"
        header = ",".join(f"c{j}" for j in range(9))
        path.write_text(header + "\n" + "\n".join(",".join(f"{v:.3f}" for v in row) for row in values) + "\n")
        n_rows = sum(1 for line in path.read_text().splitlines()[1:] if line)
        n_cols = len(path.read_text().splitlines()[0].split(","))
        d = ds.load_tabular(path, target_column="c8")
        assert (len(d), d.n_features) == (n_rows, n_cols - 1) == (1030, 8)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(ds.TabularFormatError, match="row 3, column 2"):
            ds.load_tabular(path)

    def test_missing_target(self, three_row_csv):
        _, headed = three_row_csv
        with pytest.raises(ds.TabularFormatError):
            ds.load_tabular(headed, target_column="nope")
        with pytest.raises(ds.TabularFormatError):
            ds.load_tabular(headed, target_column=7)


def _write_raw_idx(path, magic, dims, payload):
    path.write_bytes(struct.pack(f">I{len(dims)}I", magic, *dims) + bytes(payload))


class TestIdx:
    def test_single_zero_image(self, tmp_path):
        _write_raw_idx(tmp_path / "i", 0x803, (1, 28, 28), [0] * 784)
        _write_raw_idx(tmp_path / "l", 0x801, (1,), [3])
        d = ds.load_idx(tmp_path / "i", tmp_path / "l")
        assert d.images.shape == (1, 28, 28)
        assert np.all(d.images == 0.0)
        assert d.labels.tolist() == [3] and d.n_classes == 10

    def test_scaling(self, tmp_path):
        _write_raw_idx(tmp_path / "i", 0x803, (1, 1, 2), [255, 51])
        _write_raw_idx(tmp_path / "l", 0x801, (1,), [0])
        d = ds.load_idx(tmp_path / "i", tmp_path / "l")
        np.testing.assert_allclose(d.images.ravel(), [1.0, 0.2])

    def test_count_mismatch(self, tmp_path):
        _write_raw_idx(tmp_path / "i", 0x803, (10000, 1, 1), [0] * 10000)
        _write_raw_idx(tmp_path / "l", 0x801, (9999,), [0] * 9999)
        with pytest.raises(ds.IdxCountMismatchError):
            ds.load_idx(tmp_path / "i", tmp_path / "l")

    def test_magic_mismatch(self, tmp_path):
        _write_raw_idx(tmp_path / "i", 0x801, (1,), [0])
        _write_raw_idx(tmp_path / "l", 0x801, (1,), [0])
        with pytest.raises(ds.IdxMagicError):
            ds.load_idx(tmp_path / "i", tmp_path / "l")

    def test_truncated(self, tmp_path):
        _write_raw_idx(tmp_path / "i", 0x803, (2, 28, 28), [0] * 700)
        _write_raw_idx(tmp_path / "l", 0x801, (2,), [0, 1])
        with pytest.raises(ds.IdxTruncatedError):
            ds.load_idx(tmp_path / "i", tmp_path / "l")

    def test_errors_are_distinct(self):
        kinds = {ds.IdxMagicError, ds.IdxTruncatedError, ds.IdxCountMismatchError}
        assert len(kinds) == 3 and all(issubclass(k, ds.IdxFormatError) for k in kinds)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31 - 1))
    def test_roundtrip_bytes(self, tmp_path_factory, n, h, w, seed):
        tmp = tmp_path_factory.mktemp("idx")
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, size=(n, h, w), dtype=np.uint8)
        labels = rng.integers(0, 10, size=n)
        ds.write_idx(pixels, tmp / "i", tmp / "l", labels)
        d = ds.load_idx(tmp / "i", tmp / "l")
        np.testing.assert_array_equal(np.rint(d.images * 255).astype(np.uint8), pixels)
        np.testing.assert_array_equal(d.labels, labels)

    @pytest.mark.skipif(not os.environ.get("UQCOV_MNIST_DIR"), reason="set UQCOV_MNIST_DIR to full MNIST IDX files")
    def test_full_mnist_test_set(self):
        root = os.environ["UQCOV_MNIST_DIR"]
        d = ds.load_idx(os.path.join(root, "t10k-images-idx3-ubyte"), os.path.join(root, "t10k-labels-idx1-ubyte"))
        assert d.images.shape == (10000, 28, 28) and d.n_classes == 10


class TestSplits:
    def test_small(self):
        s = ds.make_splits(10, seed=1, fractions=(0.8, 0.1, 0.1))
        assert (len(s.train), len(s.val), len(s.test)) == (8, 1, 1)

    def test_deterministic(self):
        a = ds.make_splits(100, seed=5)
        b = ds.make_splits(100, seed=5)
        for x, y in zip((a.train, a.val, a.test), (b.train, b.val, b.test)):
            np.testing.assert_array_equal(x, y)
        c = ds.make_splits(100, seed=6)
        assert not np.array_equal(a.train, c.train)

    def test_boston_sizes(self):
        # floor(506 * 0.72) = 364, floor(506 * 0.18) = 91, remainder 51
        s = ds.make_splits(506, seed=0, fractions=(0.72, 0.18, 0.10))
        assert (len(s.train), len(s.val), len(s.test)) == (364, 91, 51)

    def test_too_small(self):
        with pytest.raises(ValueError):
            ds.make_splits(2, seed=0)

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            ds.make_splits(10, seed=0, fractions=(0.5, 0.5, 0.1))

    @given(st.integers(10, 2000), st.integers(0, 1000))
    def test_partition(self, n, seed):
        s = ds.make_splits(n, seed)
        allidx = np.concatenate([s.train, s.val, s.test])
        assert np.array_equal(np.sort(allidx), np.arange(n))

    def test_index_files_roundtrip(self, tmp_path):
        s = ds.make_splits(50, seed=3)
        paths = [tmp_path / f"{k}.txt" for k in ("train", "val", "test")]
        ds.write_split_files(s, *paths)
        t = ds.load_split_files(*paths)
        np.testing.assert_array_equal(s.train, t.train)
        np.testing.assert_array_equal(s.test, t.test)


class TestStandardizer:
    def test_label_sd(self):
        d = ds.TabularDataset(np.arange(8.0).reshape(4, 2), np.array([1.0, 2.0, 3.0, 4.0]))
        st_ = ds.fit_standardizer(d)
        assert st_.label_std == pytest.approx(1.2909944487358056, abs=1e-14)

    def test_standard_normal_features(self):
        x = np.random.default_rng(0).normal(size=(500, 3))
        d = ds.TabularDataset(x, np.zeros(500))
        out = ds.apply(ds.fit_standardizer(d), d)
        np.testing.assert_allclose(out.features.mean(axis=0), 0.0, atol=1e-12)

    def test_constant_column(self):
        x = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
        d = ds.TabularDataset(x, np.arange(5.0))
        st_ = ds.fit_standardizer(d)
        assert st_.feature_std[0] == 1.0
        out = ds.apply(st_, d)
        np.testing.assert_array_equal(out.features[:, 0], 0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 60), st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_moments_after_transform(self, n, d, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(3.0, 10.0, size=(n, d))
        data = ds.TabularDataset(x, rng.normal(size=n))
        out = ds.apply(ds.fit_standardizer(data), data).features
        assert np.all(np.abs(out.mean(axis=0)) <= 1e-8)
        np.testing.assert_allclose(out.var(axis=0, ddof=1), 1.0, atol=1e-8)

    def test_labels_untouched(self):
        d = ds.TabularDataset(np.random.default_rng(1).normal(size=(6, 2)), np.arange(6.0) * 10)
        out = ds.apply(ds.fit_standardizer(d), d)
        np.testing.assert_array_equal(out.labels, d.labels)
