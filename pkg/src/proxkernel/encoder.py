"""Sparse one-hot bin representation with cascading fallback for missing cells.

Observed cells become one-hot blocks of width ``n_bins``. A missing cell's
block is the average of the observed one-hot blocks of matched rows:

1. rows sharing the query row's bin on *every* observed feature;
2. failing that, rows sharing its bin on *any* observed feature;
3. failing that, the feature's global bin distribution.

Averages only ever read observed blocks of other rows, so the encoding does
not depend on the order rows are processed in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._bitset import cascade_counts
from .binning import UNASSIGNED, BinAssignment, BinModel, assign_all, fit_bin_centers
from .dataset import DataError

class Level(IntEnum):
    PENDING = -1
    OBSERVED = 0
    INTERSECTION = 1
    UNION = 2
    PRIOR = 3


@dataclass(frozen=True, eq=False)
class Representation:
    """Encoded rows: ``z`` is CSR of shape ``(n, d * n_bins)``, feature-major blocks."""

    z: sp.csr_matrix
    fallback_level: np.ndarray
    n_bins: int

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1] // self.n_bins

    def toarray(self) -> np.ndarray:
        return self.z.toarray()

    def block(self, i: int, j: int) -> np.ndarray:
        return self.z[i, j * self.n_bins:(j + 1) * self.n_bins].toarray().ravel()

    def level_counts(self) -> dict[str, int]:
        return {lvl.name.lower(): int((self.fallback_level == lvl).sum())
                for lvl in Level if lvl is not Level.PENDING}

    def nbytes(self) -> int:
        return self.z.data.nbytes + self.z.indices.nbytes + self.z.indptr.nbytes

    def header(self) -> dict:
        return {"n": self.n, "d": self.d, "n_bins": self.n_bins, "layout": "feature-major blocks"}

    def save_csv(self, path) -> None:
        dense = self.toarray()
        cols = [f"f{j}_b{k + 1}" for j in range(self.d) for k in range(self.n_bins)]
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in dense:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def save_sparse(self, path, extra: Optional[dict] = None) -> None:
        """Triplet text: one JSON header line, then ``row,col,value`` lines."""
        coo = self.z.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({**(extra or {}), **self.header()}, sort_keys=True) + "\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r},{c},{float(v)!r}\n")

    @classmethod
    def load_sparse(cls, path) -> "Representation":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DataError(f"{path}: empty representation file")
        try:
            head = json.loads(lines[0])
            n, d, n_bins = int(head["n"]), int(head["d"]), int(head["n_bins"])
            trip = [ln.split(",") for ln in lines[1:] if ln.strip()]
            rows = np.array([int(t[0]) for t in trip], dtype=np.int64)
            cols = np.array([int(t[1]) for t in trip], dtype=np.int64)
            vals = np.array([float(t[2]) for t in trip], dtype=float)
        except (ValueError, KeyError, IndexError) as exc:
            raise DataError(f"{path}: malformed representation file ({exc})") from exc
        if n < 1 or (rows.size and (rows.max() >= n or cols.max() >= d * n_bins)):
            raise DataError(f"{path}: triplets out of range for header {head}")
        z = sp.csr_matrix((vals, (rows, cols)), shape=(n, d * n_bins))
        levels = np.full((n, d), Level.PENDING, dtype=np.int8)
        return cls(z, levels, n_bins)


@dataclass(frozen=True, eq=False)
class GlobalPriors:
    """Row j is the bin distribution of feature j over its observed cells."""

    p: np.ndarray


def encode_observed(assignments: BinAssignment, n_bins: Optional[int] = None) -> Representation:
    n_bins = assignments.n_bins if n_bins is None else n_bins
    bins = assignments.bins
    if bins.size and (bins.min() < UNASSIGNED or bins.max() > n_bins):
        raise DataError(f"bin index out of range 1..{n_bins}")
    n, d = bins.shape
    obs = bins != UNASSIGNED
    rows, feats = np.nonzero(obs)
    cols = feats * n_bins + bins[rows, feats] - 1
    z = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, d * n_bins))
    levels = np.where(obs, Level.OBSERVED, Level.PENDING).astype(np.int8)
    return Representation(z, levels, n_bins)


def match_set(i: int, j: int, assignments: BinAssignment) -> set[int]:
    """Rows other than ``i`` that observe feature ``j`` in the same bin as ``i``."""
    b = assignments.bins[i, j]
    if b == UNASSIGNED:
        raise DataError(f"cell ({i}, {j}) is missing")
    members = set(np.flatnonzero(assignments.bins[:, j] == b).tolist())
    members.discard(i)
    return members


def _observed_features(i: int, assignments: BinAssignment) -> np.ndarray:
    feats = np.flatnonzero(assignments.bins[i] != UNASSIGNED)
    if feats.size == 0:
        raise DataError(f"row {i} has no observed features")
    return feats


def intersection_match(i: int, assignments: BinAssignment) -> set[int]:
    feats = _observed_features(i, assignments)
    out = match_set(i, int(feats[0]), assignments)
    for j in feats[1:]:
        out &= match_set(i, int(j), assignments)
    return out


def union_match(i: int, assignments: BinAssignment) -> set[int]:
    out: set[int] = set()
    for j in _observed_features(i, assignments):
        out |= match_set(i, int(j), assignments)
    return out


def kme_estimate(S, j: int, assignments: BinAssignment,
                 n_bins: Optional[int] = None) -> Optional[np.ndarray]:
    """Mean one-hot block of feature ``j`` over members of ``S`` observing ``j``.

    Returns None when no member observes ``j``.
    """
    n_bins = assignments.n_bins if n_bins is None else n_bins
    idx = np.fromiter(S, dtype=np.int64)
    b = assignments.bins[idx, j]
    b = b[b != UNASSIGNED]
    if b.size == 0:
        return None
    return np.bincount(b - 1, minlength=n_bins) / b.size


def global_prior(assignments: BinAssignment, n_bins: Optional[int] = None) -> GlobalPriors:
    n_bins = assignments.n_bins if n_bins is None else n_bins
    d = assignments.bins.shape[1]
    p = np.empty((d, n_bins))
    for j in range(d):
        b = assignments.bins[:, j]
        b = b[b != UNASSIGNED]
        if b.size == 0:
            raise DataError(f"feature {j} is never observed")
        p[j] = np.bincount(b - 1, minlength=n_bins) / b.size
    return GlobalPriors(p)


def _pack_members(ref_bins: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Bitset of reference rows per (feature, bin), as uint64 words.

    Returns ``(members, full)`` with ``members`` of shape ``(d, n_bins, words)``
    and ``full`` the bitset of all reference rows.
    """
    n_ref, d = ref_bins.shape
    words = max(1, -(-n_ref // 64))
    onehot = ref_bins.T[:, None, :] == np.arange(1, n_bins + 1)[None, :, None]
    buf = np.zeros((d, n_bins, words * 8), dtype=np.uint8)
    packed = np.packbits(onehot, axis=2, bitorder="little")
    buf[:, :, :packed.shape[2]] = packed
    full = np.zeros(words * 64, dtype=bool)
    full[:n_ref] = True
    return buf.view(np.uint64), np.packbits(full, bitorder="little").view(np.uint64)


def cascade_fill(query_bins: np.ndarray, ref_bins: np.ndarray, n_bins: int,
                 priors: GlobalPriors, exclude_self: bool = True):
    """Estimate every missing block of ``query_bins`` against ``ref_bins``.

    With ``exclude_self`` the query rows *are* the reference rows and row i
    never matches itself. Returns ``(rows, feats, blocks, levels)`` for the
    missing cells in row-major order.
    """
    missing = query_bins == UNASSIGNED
    out_rows, out_feats = np.nonzero(missing)
    levels = np.full(out_rows.size, Level.PRIOR, dtype=np.int8)
    counts = np.zeros((out_rows.size, n_bins), dtype=np.int64)
    if out_rows.size:
        members, full = _pack_members(ref_bins, n_bins)
        starts = np.concatenate(([0], np.cumsum(missing.sum(axis=1))))
        cascade_counts(np.ascontiguousarray(query_bins, dtype=np.int64), members, full,
                       exclude_self, starts, counts, levels)
    total = counts.sum(axis=1)
    est = total > 0
    blocks = np.empty((out_rows.size, n_bins))
    blocks[est] = counts[est] / total[est, None]
    blocks[~est] = priors.p[out_feats[~est]]
    return out_rows, out_feats, blocks, levels


def encode_bins(query: BinAssignment, reference: BinAssignment, priors: GlobalPriors,
                exclude_self: bool) -> Representation:
    n_bins = reference.n_bins
    if query.bins.shape[1] != reference.bins.shape[1]:
        raise DataError("query and reference differ in feature count")
    base = encode_observed(query, n_bins)
    rows, feats, blocks, levels = cascade_fill(query.bins, reference.bins, n_bins, priors,
                                               exclude_self=exclude_self)
    if rows.size == 0:
        return base
    nz_p, nz_k = np.nonzero(blocks)
    est = sp.csr_matrix((blocks[nz_p, nz_k], (rows[nz_p], feats[nz_p] * n_bins + nz_k)),
                        shape=base.z.shape)
    z = (base.z + est).tocsr()
    z.sort_indices()
    lv = base.fallback_level.copy()
    lv[rows, feats] = levels
    return Representation(z, lv, n_bins)


def encode_dataset(data, model: Optional[BinModel] = None, n_bins: int = 4) -> Representation:
    """Full transductive pipeline: assign, one-hot, then cascade every missing cell."""
    if model is None:
        model = fit_bin_centers(data, n_bins)
    assignments = assign_all(data, model)
    priors = global_prior(assignments)
    return encode_bins(assignments, assignments, priors, exclude_self=True)
