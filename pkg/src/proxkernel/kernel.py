"""Proximity kernel values, gram matrices and a numerical PSD diagnostic."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .dataset import DataError
from .encoder import Representation

# below this size a dense eigensolve is cheaper than ARPACK
_DENSE_EIG_MAX = 64


@dataclass(frozen=True, eq=False)
class GramMatrix:
    K: np.ndarray
    d: int
    n_bins: int
    dataset_hash: Optional[str] = None

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def save(self, path) -> Path:
        """Dense CSV plus a ``.meta.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        np.savetxt(path, self.K, delimiter=",", fmt="%.17g")
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps({"n": self.n, "d": self.d, "n_bins": self.n_bins,
                                       "dataset_hash": self.dataset_hash}, indent=2))
        return sidecar


def kernel_value(z_m, z_n, d: int) -> float:
    """Average per-feature co-occurrence probability of two encoded rows."""
    a = np.asarray(z_m.toarray() if sp.issparse(z_m) else z_m, dtype=float).ravel()
    b = np.asarray(z_n.toarray() if sp.issparse(z_n) else z_n, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError(f"representation widths differ: {a.size} vs {b.size}")
    return float(a @ b) / d


def proximity_kernel(Z, Y=None, *, n_features: int) -> np.ndarray:
    """Pairwise kernel between encoded rows of ``Z`` and ``Y`` (default ``Z``)."""
    Z = sp.csr_matrix(Z)
    Y = Z if Y is None else sp.csr_matrix(Y)
    if Z.shape[1] != Y.shape[1]:
        raise DataError("representation widths differ")
    return np.asarray((Z @ Y.T).todense()) / n_features


def gram(rep: Representation, dataset_hash: Optional[str] = None) -> GramMatrix:
    """Gram matrix of ``rep``; the upper triangle is mirrored so symmetry is exact."""
    K = proximity_kernel(rep.z, n_features=rep.d)
    upper = np.triu(K)
    K = upper + np.triu(K, 1).T
    return GramMatrix(K, rep.d, rep.n_bins, dataset_hash)


def min_eigenvalue(gm) -> float:
    """Smallest eigenvalue of a symmetric matrix (Lanczos, dense for small n)."""
    K = gm.K if isinstance(gm, GramMatrix) else np.asarray(gm, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
        raise DataError(f"expected a nonempty square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise DataError("matrix has non-finite entries")
    if K.shape[0] <= _DENSE_EIG_MAX:
        return float(np.linalg.eigvalsh(K)[0])
    try:
        vals = eigsh(K, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
    except ArpackNoConvergence:
        return float(np.linalg.eigvalsh(K)[0])
    return float(vals[0])
