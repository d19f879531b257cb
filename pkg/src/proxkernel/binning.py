"""Equal-frequency bin centers and nearest-center (Voronoi) assignment."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DataError, Dataset

#: Bin index carried by missing cells; observed cells get 1..n_bins.
UNASSIGNED = 0


def as_masked(data) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(values, missing_mask)`` for a Dataset or a float matrix with NaNs."""
    if isinstance(data, Dataset):
        return data.values, data.missing_mask
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {X.shape}")
    mask = np.isnan(X)
    if np.isinf(X).any():
        raise DataError("non-finite observed values")
    return X, mask


@dataclass(frozen=True, eq=False)
class BinModel:
    """Per-feature bin centers, shape ``(d, n_bins)``, each row nondecreasing."""

    n_bins: int
    centers: np.ndarray

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[1] != self.n_bins:
            raise ValueError(f"centers must have shape (d, {self.n_bins})")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def d(self) -> int:
        return self.centers.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinModel):
            return NotImplemented
        return self.n_bins == other.n_bins and np.array_equal(self.centers, other.centers)

    __hash__ = None

    def to_json(self) -> str:
        return json.dumps({"n_bins": self.n_bins, "centers": self.centers.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "BinModel":
        obj = json.loads(text)
        return cls(int(obj["n_bins"]), np.array(obj["centers"], dtype=float).reshape(-1, int(obj["n_bins"])))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "BinModel":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class BinAssignment:
    """n x d bin indices; :data:`UNASSIGNED` marks missing cells."""

    bins: np.ndarray
    n_bins: int

    @property
    def observed(self) -> np.ndarray:
        return self.bins != UNASSIGNED


def fit_bin_centers(data, n_bins: int) -> BinModel:
    """Place ``n_bins`` centers per feature at evenly spaced percentiles.

    Percentile ``(k - 1) * 100 / (n_bins - 1)`` of the observed values, with
    linear interpolation between order statistics, so the first and last
    centers are the observed minimum and maximum.
    """
    if not isinstance(n_bins, (int, np.integer)) or n_bins < 2:
        raise DataError(f"n_bins must be an integer >= 2, got {n_bins!r}")
    values, mask = as_masked(data)
    q = np.arange(n_bins) * 100.0 / (n_bins - 1)
    centers = np.empty((values.shape[1], n_bins))
    for j in range(values.shape[1]):
        obs = values[~mask[:, j], j]
        if obs.size == 0:
            raise DataError(f"feature {j} has no observed values")
        centers[j] = np.percentile(obs, q, method="linear")
    # interpolation rounding can break monotonicity by an ulp
    centers = np.maximum.accumulate(centers, axis=1)
    return BinModel(int(n_bins), centers)


def assign_bin(value: float, centers) -> int:
    """1-based index of the nearest center; ties go to the smallest index."""
    if not math.isfinite(value):
        raise DataError(f"cannot assign non-finite value {value!r}")
    centers = np.asarray(centers, dtype=float)
    return int(np.argmin(np.abs(value - centers))) + 1


def assign_all(data, model: BinModel) -> BinAssignment:
    values, mask = as_masked(data)
    n, d = values.shape
    if d != model.d:
        raise DataError(f"model was fitted on {model.d} features, data has {d}")
    bins = np.full((n, d), UNASSIGNED, dtype=np.int64)
    for j in range(d):
        obs = ~mask[:, j]
        dist = np.abs(values[obs, j][:, None] - model.centers[j][None, :])
        bins[obs, j] = np.argmin(dist, axis=1) + 1
    return BinAssignment(bins, model.n_bins)
