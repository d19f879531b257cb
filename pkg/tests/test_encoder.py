import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxkernel.binning import BinAssignment, assign_all, fit_bin_centers
from proxkernel.dataset import DataError
from proxkernel.encoder import (Level, Representation, cascade_fill, encode_bins, encode_dataset,
                                encode_observed, global_prior, intersection_match, kme_estimate,
                                match_set, union_match)

import oracles
from conftest import random_incomplete

A, B, C, D, E = range(5)


class TestMatchSets:
    def test_intersection_for_row_with_missing(self, abcd):
        assert intersection_match(D, abcd) == {A, B}

    def test_intersection_can_be_empty(self, abcd):
        assert intersection_match(A, abcd) == set()

    def test_union(self, abcd):
        assert union_match(A, abcd) == {B, C, D}
        assert union_match(D, abcd) == {A, B}

    def test_self_excluded(self, abcd):
        assert A not in match_set(A, 0, abcd)

    def test_match_set_on_missing_cell(self, abcd):
        with pytest.raises(DataError):
            match_set(D, 1, abcd)

    def test_all_missing_row(self):
        a = BinAssignment(np.array([[0, 0], [1, 1]]), 2)
        with pytest.raises(DataError, match="no observed"):
            union_match(0, a)


class TestEstimates:
    def test_kme_over_intersection(self, abcd):
        np.testing.assert_allclose(kme_estimate({A, B}, 1, abcd), [0.5, 0.5])

    def test_kme_none_when_nobody_observes(self, abcd):
        assert kme_estimate({D}, 1, abcd) is None

    def test_prior(self, abcd):
        np.testing.assert_allclose(global_prior(abcd).p[1], [2 / 3, 1 / 3])

    def test_cascade_levels_on_fixture(self, abcde):
        rep = encode_bins(abcde, abcde, global_prior(abcde), exclude_self=True)
        np.testing.assert_allclose(rep.block(D, 1), [0.5, 0.5, 0])
        assert rep.fallback_level[D, 1] == Level.INTERSECTION
        # E shares no bin with anyone: the prior fills in
        np.testing.assert_allclose(rep.block(E, 1), [2 / 3, 1 / 3, 0])
        assert rep.fallback_level[E, 1] == Level.PRIOR
        assert rep.level_counts() == {"observed": 8, "intersection": 1, "union": 0, "prior": 1}

    def test_union_level_reached(self):
        # row 0 agrees with row 1 on f0 and row 2 on f1, never both;
        # only row 1 observes f2
        bins = np.array([[1, 1, 0], [1, 2, 1], [2, 1, 0], [2, 2, 2]])
        a = BinAssignment(bins, 2)
        rep = encode_bins(a, a, global_prior(a), exclude_self=True)
        assert rep.fallback_level[0, 2] == Level.UNION
        np.testing.assert_allclose(rep.block(0, 2), [1.0, 0.0])

    def test_intersection_members_lacking_feature_fall_through(self):
        # S1(row 0) = {1}, but row 1 also misses f2, so the union is consulted
        bins = np.array([[1, 1, 0], [1, 1, 0], [1, 2, 2], [2, 2, 1]])
        a = BinAssignment(bins, 2)
        assert intersection_match(0, a) == {1}
        rep = encode_bins(a, a, global_prior(a), exclude_self=True)
        assert rep.fallback_level[0, 2] == Level.UNION
        np.testing.assert_allclose(rep.block(0, 2), [0.0, 1.0])

    def test_observed_only_is_one_hot(self, abcd):
        z = encode_observed(abcd).toarray()
        np.testing.assert_array_equal(z[A], [1, 0, 1, 0])
        np.testing.assert_array_equal(z[D], [1, 0, 0, 0])

    def test_out_of_range_bin(self):
        with pytest.raises(DataError, match="out of range"):
            encode_observed(BinAssignment(np.array([[3]]), 2))


def _rows_strategy():
    return st.integers(1, 20).flatmap(lambda n: st.integers(1, 4).flatmap(lambda d: st.lists(
        st.lists(st.one_of(st.none(), st.integers(0, 4).map(float)), min_size=d, max_size=d),
        min_size=n, max_size=n)))


def _to_array(rows):
    return np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)


class TestAgainstOracle:
    @settings(max_examples=200, deadline=None)
    @given(_rows_strategy(), st.integers(2, 3))
    def test_micro_datasets(self, rows, n_bins):
        d = len(rows[0])
        for j in range(d):
            if all(r[j] is None for r in rows):
                rows[0][j] = 0.0
        bins, centers = oracles.bins_from_rows(rows, n_bins)
        z_ref, lv_ref = oracles.cascade(bins, n_bins)
        X = _to_array(rows)
        model = fit_bin_centers(X, n_bins)
        np.testing.assert_allclose(model.centers, centers, rtol=0, atol=1e-12)
        rep = encode_dataset(X, model)
        np.testing.assert_allclose(rep.toarray(), z_ref, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(rep.fallback_level, lv_ref)

    def test_bitset_spans_several_words(self):
        rng = np.random.default_rng(7)
        X = random_incomplete(rng, 150, 3, 0.4, levels=3)
        rows = [[None if np.isnan(v) else float(v) for v in r] for r in X]
        bins, _ = oracles.bins_from_rows(rows, 3)
        z_ref, lv_ref = oracles.cascade(bins, 3)
        rep = encode_dataset(X, n_bins=3)
        np.testing.assert_allclose(rep.toarray(), z_ref, atol=1e-12)
        np.testing.assert_array_equal(rep.fallback_level, lv_ref)


class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(0, 0.6))
    def test_blocks_are_distributions(self, seed, n_bins, rate):
        rng = np.random.default_rng(seed)
        X = random_incomplete(rng, int(rng.integers(2, 80)), int(rng.integers(1, 6)), rate)
        rep = encode_dataset(X, n_bins=n_bins)
        z = rep.toarray().reshape(rep.n, rep.d, n_bins)
        np.testing.assert_allclose(z.sum(axis=2), 1.0, atol=1e-12)
        assert (z >= 0).all() and (z <= 1).all()
        assert (rep.fallback_level >= Level.OBSERVED).all()
        observed = ~np.isnan(X)
        assert (rep.fallback_level[observed] == Level.OBSERVED).all()
        assert (rep.fallback_level[~observed] > Level.OBSERVED).all()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_intersection_inside_union(self, seed):
        rng = np.random.default_rng(seed)
        X = random_incomplete(rng, 25, 4, 0.3, levels=3)
        a = assign_all(X, fit_bin_centers(X, 3))
        for i in range(25):
            if a.observed[i].any():
                assert intersection_match(i, a) <= union_match(i, a)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_row_order_equivariant(self, seed):
        rng = np.random.default_rng(seed)
        X = random_incomplete(rng, 40, 3, 0.3)
        perm = rng.permutation(40)
        z = encode_dataset(X, n_bins=4).toarray()
        zp = encode_dataset(X[perm], n_bins=4).toarray()
        np.testing.assert_allclose(zp, z[perm], atol=1e-12)

    def test_complete_data_uses_no_fallback(self):
        X = np.random.default_rng(0).normal(size=(30, 4))
        rep = encode_dataset(X, n_bins=5)
        assert rep.level_counts()["observed"] == 120
        assert rep.z.nnz == 120

    def test_fully_missing_row_takes_priors(self):
        X = np.array([[np.nan, np.nan], [0.0, 0.0], [1.0, 1.0], [1.0, 0.0]])
        rep = encode_dataset(X, n_bins=2)
        assert (rep.fallback_level[0] == Level.PRIOR).all()
        np.testing.assert_allclose(rep.block(0, 0), [1 / 3, 2 / 3])

    def test_cascade_fill_external_queries(self, abcd):
        query = np.array([[2, 0], [0, 0]])
        rows, feats, blocks, levels = cascade_fill(query, abcd.bins, 2, global_prior(abcd),
                                                   exclude_self=False)
        assert rows.tolist() == [0, 1, 1] and feats.tolist() == [1, 0, 1]
        # only C is in bin 2 of f0, and C has f1 in bin 1
        np.testing.assert_allclose(blocks[0], [1, 0])
        assert levels.tolist() == [Level.INTERSECTION, Level.PRIOR, Level.PRIOR]


class TestSerialization:
    def test_sparse_roundtrip(self, tmp_path):
        X = random_incomplete(np.random.default_rng(1), 30, 3, 0.3)
        rep = encode_dataset(X, n_bins=4)
        rep.save_sparse(tmp_path / "r.txt", extra={"dataset_hash": "abc"})
        back = Representation.load_sparse(tmp_path / "r.txt")
        assert back.n_bins == 4
        assert (back.z != rep.z).nnz == 0

    def test_dense_csv(self, tmp_path):
        rep = encode_dataset(np.array([[0.0, 1.0], [1.0, np.nan], [0.5, 0.0]]), n_bins=2)
        rep.save_csv(tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert len(lines) == 4
        loaded = np.loadtxt(tmp_path / "r.csv", delimiter=",", skiprows=1)
        np.testing.assert_allclose(loaded, rep.toarray())

    @pytest.mark.parametrize("text", ["", "not json\n", '{"n": 1, "d": 1, "n_bins": 2}\n0,5,1.0\n'])
    def test_malformed(self, tmp_path, text):
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(DataError):
            Representation.load_sparse(tmp_path / "bad.txt")
