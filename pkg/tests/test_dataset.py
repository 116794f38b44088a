import numpy as np
import pytest

from warmgp.dataset import Dataset, load_csv, sample_split, standardize
from warmgp.errors import DatasetError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        d = load_csv(write(tmp_path, "1,2,3\n4,5,6\n7,8,9\n"), 2)
        assert d.X.shape == (3, 2) and d.y.shape == (3,)
        np.testing.assert_array_equal(d.y, [3, 6, 9])

    def test_single_row(self, tmp_path):
        d = load_csv(write(tmp_path, "1.0,2.0,3.0\n"), 2)
        np.testing.assert_array_equal(d.X, [[1.0, 2.0]])
        np.testing.assert_array_equal(d.y, [3.0])

    def test_target_in_middle_keeps_feature_order(self, tmp_path):
        d = load_csv(write(tmp_path, "1,2,3\n"), 1)
        np.testing.assert_array_equal(d.X, [[1, 3]])
        assert d.y[0] == 2

    def test_negative_target_index(self, tmp_path):
        d = load_csv(write(tmp_path, "1,2,3\n"), -1)
        assert d.y[0] == 3

    def test_non_numeric_names_line(self, tmp_path):
        with pytest.raises(DatasetError, match="line 1"):
            load_csv(write(tmp_path, "1.0,abc,3.0\n"), 2)

    def test_wrong_arity_names_line(self, tmp_path):
        with pytest.raises(DatasetError, match="line 3"):
            load_csv(write(tmp_path, "1,2,3\n4,5,6\n7,8\n"), 2)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, ""), 0)

    def test_header_skipped(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b,y\n1,2,3\n"), 2, header=True)
        assert d.n == 1
        with pytest.raises(DatasetError, match="line 1"):
            load_csv(write(tmp_path, "a,b,y\n1,2,3\n", "e.csv"), 2)

    def test_bad_target_column(self, tmp_path):
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, "1,2\n"), 5)

    def test_name_from_stem(self, tmp_path):
        assert load_csv(write(tmp_path, "1,2\n", "pol.csv"), 1).name == "pol"


class TestStandardize:
    def test_two_point_column(self):
        d, _ = standardize(Dataset(np.array([[0.0], [2.0]]), np.array([0.0, 2.0])))
        np.testing.assert_allclose(d.X[:, 0], [-1, 1])

    def test_constant_column_maps_to_zero(self):
        X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
        d, _ = standardize(Dataset(X, np.array([1.0, 2.0, 3.0])))
        np.testing.assert_array_equal(d.X[:, 0], 0.0)

    def test_three_point_column(self):
        d, _ = standardize(Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 3.0])))
        # population std of [1,2,3] is sqrt(2/3)
        np.testing.assert_allclose(d.X[:, 0], [-1.2247, 0, 1.2247], atol=1e-4)
        np.testing.assert_allclose(d.y, [-1.2247, 0, 1.2247], atol=1e-4)

    def test_moments(self, rng):
        X = rng.normal(3.0, 5.0, size=(200, 4))
        d, _ = standardize(Dataset(X, rng.exponential(size=200)))
        np.testing.assert_allclose(d.X.mean(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(d.X.std(axis=0), 1, atol=1e-9)
        assert abs(d.y.mean()) < 1e-9 and abs(d.y.std() - 1) < 1e-9

    def test_round_trip(self, rng):
        orig = Dataset(rng.normal(size=(50, 3)) * [1, 10, 100], rng.normal(size=50))
        d, params = standardize(orig)
        back = params.inverse(d)
        np.testing.assert_allclose(back.X, orig.X, atol=1e-9)
        np.testing.assert_allclose(back.y, orig.y, atol=1e-9)

    def test_needs_two_rows(self):
        with pytest.raises(DatasetError):
            standardize(Dataset(np.ones((1, 2)), np.ones(1)))


class TestSampleSplit:
    def make(self, rng, n=15000):
        return Dataset(rng.normal(size=(n, 2)), rng.normal(size=n))

    def test_sizes_and_disjoint(self, rng):
        s = sample_split(self.make(rng), 1000, 100, seed=0)
        assert s.X1.shape == (1000, 2) and s.X2.shape == (100, 2)
        assert len(set(s.idx1) | set(s.idx2)) == 1100

    def test_rows_come_from_source(self, rng):
        d = self.make(rng, 50)
        s = sample_split(d, 10, 5, seed=1)
        np.testing.assert_array_equal(s.X1, d.X[s.idx1])
        np.testing.assert_array_equal(s.y2, d.y[s.idx2])

    def test_deterministic(self, rng):
        d = self.make(rng, 100)
        a, b = sample_split(d, 20, 5, 7), sample_split(d, 20, 5, 7)
        np.testing.assert_array_equal(a.idx1, b.idx1)
        np.testing.assert_array_equal(a.idx2, b.idx2)

    def test_rejects_empty_second_part(self, rng):
        d = self.make(rng, 10)
        with pytest.raises(DatasetError):
            sample_split(d, 10, 0, 0)

    def test_rejects_oversize(self, rng):
        with pytest.raises(DatasetError):
            sample_split(self.make(rng, 10), 8, 3, 0)


def test_dataset_shape_mismatch():
    with pytest.raises(DatasetError):
        Dataset(np.ones((3, 2)), np.ones(4))
