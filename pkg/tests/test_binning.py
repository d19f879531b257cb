import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxkernel.binning import UNASSIGNED, BinModel, assign_all, assign_bin, fit_bin_centers
from proxkernel.dataset import DataError, from_array

from oracles import percentile_linear


def col(*values):
    return np.array(values, dtype=float)[:, None]


class TestFitBinCenters:
    def test_symmetric_ladder(self):
        assert fit_bin_centers(col(0, 10, 20, 30, 40), 3).centers[0].tolist() == [0, 20, 40]

    def test_constant_feature(self):
        assert fit_bin_centers(col(5, 5, 5), 3).centers[0].tolist() == [5, 5, 5]

    def test_interpolated_median(self):
        # sorted (1,2,3,100): the median sits halfway between 2 and 3
        assert fit_bin_centers(col(1, 2, 3, 100), 3).centers[0].tolist() == [1, 2.5, 100]

    def test_missing_values_ignored(self):
        X = np.array([[0.0], [np.nan], [40.0], [20.0]])
        assert fit_bin_centers(X, 3).centers[0].tolist() == [0, 20, 40]

    def test_n_bins_too_small(self):
        with pytest.raises(DataError, match="n_bins"):
            fit_bin_centers(col(1, 2), 1)

    def test_unobserved_feature(self):
        with pytest.raises(DataError, match="no observed"):
            fit_bin_centers(np.array([[1.0, np.nan], [2.0, np.nan]]), 2)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.integers(2, 10))
    def test_matches_order_statistic_oracle(self, values, n_bins):
        centers = fit_bin_centers(col(*values), n_bins).centers[0]
        expected = [percentile_linear(values, (k - 1) * 100 / (n_bins - 1)) for k in range(1, n_bins + 1)]
        np.testing.assert_allclose(centers, expected, rtol=1e-12, atol=1e-9)
        assert np.all(np.diff(centers) >= 0)
        assert centers[0] == min(values) and centers[-1] == max(values)

    def test_refit_is_identical(self):
        X = np.random.default_rng(0).normal(size=(50, 3))
        assert fit_bin_centers(X, 5) == fit_bin_centers(X.copy(), 5)

    def test_dense_region_gets_closer_centers(self):
        rng = np.random.default_rng(1)
        dense = rng.uniform(0, 1, 500)
        spread = rng.uniform(10, 100, 100)
        c = fit_bin_centers(col(*dense, *spread), 10).centers[0]
        gaps = np.diff(c)
        inside = gaps[c[1:] <= 1.0]
        outside = gaps[c[:-1] >= 10.0]
        assert inside.size and outside.size
        assert inside.max() < outside.min()

    def test_json_roundtrip(self, tmp_path):
        m = fit_bin_centers(np.random.default_rng(2).normal(size=(30, 4)), 6)
        m.save(tmp_path / "m.json")
        assert BinModel.load(tmp_path / "m.json") == m
        assert json.loads(m.to_json())["n_bins"] == 6


class TestAssignBin:
    @pytest.mark.parametrize("value,centers,expected", [
        (2.4, [1, 3, 5], 2),
        (10, [0, 20, 40], 1),      # equidistant: smallest index wins
        (-100, [0, 20, 40], 1),
        (1e9, [0, 20, 40], 3),
        (5, [5, 5, 5], 1),         # duplicate centers: higher copies unreachable
    ])
    def test_examples(self, value, centers, expected):
        assert assign_bin(value, centers) == expected

    def test_non_finite(self):
        with pytest.raises(DataError):
            assign_bin(float("nan"), [0, 1])

    # eighths keep every distance exact, so rounding cannot manufacture ties
    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.integers(-800, 800), min_size=2, max_size=8),
           st.integers(-1600, 1600), st.integers(-1600, 1600))
    def test_monotone(self, centers, a, b):
        centers = sorted(c / 8 for c in centers)
        a, b = a / 8, b / 8
        lo, hi = min(a, b), max(a, b)
        assert assign_bin(lo, centers) <= assign_bin(hi, centers)


class TestAssignAll:
    def test_mask_semantics(self):
        X = np.array([[np.nan, np.nan], [1.0, 2.0], [3.0, 4.0]])
        a = assign_all(X, fit_bin_centers(X, 2))
        assert (a.bins[0] == UNASSIGNED).all()
        assert ((a.bins[1:] >= 1) & (a.bins[1:] <= 2)).all()
        assert np.array_equal(a.observed, ~np.isnan(X))

    def test_matches_scalar_assign(self):
        X = np.random.default_rng(3).normal(size=(40, 3))
        m = fit_bin_centers(X, 4)
        a = assign_all(X, m)
        for i in range(40):
            for j in range(3):
                assert a.bins[i, j] == assign_bin(X[i, j], m.centers[j])

    def test_dimension_mismatch(self):
        m = fit_bin_centers(np.zeros((3, 2)), 2)
        with pytest.raises(DataError, match="features"):
            assign_all(np.zeros((3, 3)), m)

    def test_dense_pair_splits_sparse_pair_shares(self):
        # ten points on [0, 0.9] plus three far out; 4 centers land at 0, 0.4, 0.8, 50
        values = [i / 10 for i in range(10)] + [10, 30, 50]
        m = fit_bin_centers(col(*values), 4)
        np.testing.assert_allclose(m.centers[0], [0, 0.4, 0.8, 50])
        centers = m.centers[0]
        assert assign_bin(0.15, centers) != assign_bin(0.25, centers)
        assert assign_bin(20.0, centers) == assign_bin(20.1, centers)

    def test_dataset_input(self):
        ds = from_array([[1.0, np.nan], [2.0, 3.0]])
        assert assign_all(ds, fit_bin_centers(ds, 2)).bins[0, 1] == UNASSIGNED
