"""scikit-learn compatible wrappers around the encoding pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .binning import assign_all, fit_bin_centers
from .dataset import DataError, Dataset
from .encoder import Representation, encode_bins, global_prior
from .kernel import proximity_kernel


def _check_X(X):
    if isinstance(X, Dataset):
        X = X.values
    return check_array(X, dtype=float, ensure_all_finite="allow-nan")


class ProximityKernelEncoder(TransformerMixin, BaseEstimator):
    """Encode incomplete rows into the sparse proximity-kernel representation.

    Missing entries are NaN. ``fit`` learns per-feature bin centers from the
    observed values and keeps the training rows' bin assignments as the
    reference set for estimating missing blocks. The inner product of two
    transformed rows divided by ``n_features_in_`` is the proximity kernel.

    Parameters
    ----------
    n_bins : int, default=4
        Bin centers per feature.
    sparse_output : bool, default=True
        Return a CSR matrix from ``transform``; dense ndarray otherwise.

    Attributes
    ----------
    bin_model_ : BinModel
    reference_ : BinAssignment
        Bin assignments of the training rows.
    priors_ : GlobalPriors
    fallback_level_ : ndarray of shape (n_samples, n_features)
        Cascade level used per cell by the last ``fit_transform``.
    """

    def __init__(self, n_bins=4, sparse_output=True):
        self.n_bins = n_bins
        self.sparse_output = sparse_output

    def fit(self, X, y=None):
        X = _check_X(X)
        self.bin_model_ = fit_bin_centers(X, self.n_bins)
        self.reference_ = assign_all(X, self.bin_model_)
        self.priors_ = global_prior(self.reference_)
        self.n_features_in_ = X.shape[1]
        return self

    def encode(self, X) -> Representation:
        """Encode new rows against the training rows."""
        check_is_fitted(self, "bin_model_")
        X = _check_X(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return encode_bins(assign_all(X, self.bin_model_), self.reference_, self.priors_,
                           exclude_self=False)

    def fit_encode(self, X) -> Representation:
        """Fit and encode the training rows themselves (a row never matches itself)."""
        self.fit(X)
        rep = encode_bins(self.reference_, self.reference_, self.priors_, exclude_self=True)
        self.fallback_level_ = rep.fallback_level
        return rep

    def _output(self, rep):
        return rep.z if self.sparse_output else rep.toarray()

    def transform(self, X):
        return self._output(self.encode(X))

    def fit_transform(self, X, y=None, **fit_params):
        return self._output(self.fit_encode(X))

    def kernel(self, X, Y=None) -> np.ndarray:
        """Proximity kernel between rows of ``X`` and ``Y`` (default ``X``)."""
        Zx = self.encode(X).z
        Zy = None if Y is None else self.encode(Y).z
        return proximity_kernel(Zx, Zy, n_features=self.n_features_in_)


class MeanModeImputer(TransformerMixin, BaseEstimator):
    """Fill NaNs with the column mean, or the column mode for categorical columns.

    Mode ties resolve to the smallest code.
    """

    def __init__(self, categorical_features=()):
        self.categorical_features = categorical_features

    def fit(self, X, y=None):
        X = _check_X(X)
        cat = set(self.categorical_features)
        fill = np.empty(X.shape[1])
        for j in range(X.shape[1]):
            col = X[~np.isnan(X[:, j]), j]
            if col.size == 0:
                raise DataError(f"feature {j} is never observed")
            if j in cat:
                codes, freq = np.unique(col, return_counts=True)
                fill[j] = codes[np.argmax(freq)]
            else:
                fill[j] = col.mean()
        self.fill_values_ = fill
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "fill_values_")
        X = _check_X(X).copy()
        rows, cols = np.nonzero(np.isnan(X))
        X[rows, cols] = self.fill_values_[cols]
        return X
