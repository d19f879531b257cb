"""Incomplete tabular data: container, CSV ingestion and MCAR injection."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_MISSING_MARKERS = frozenset({"?", "", "NaN", "nan"})

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class FeatureKind:
    """Kind of a feature column.

    ``category_map`` maps category text to its ordinal code (first-appearance
    order) and is only set for categorical features.
    """

    tag: str = NUMERIC
    category_map: Optional[dict[str, int]] = None

    def __post_init__(self):
        if self.tag not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown feature kind {self.tag!r}")
        if self.tag == CATEGORICAL:
            codes = sorted((self.category_map or {}).values())
            if codes != list(range(len(codes))):
                raise ValueError("category codes must be contiguous from 0")

    @property
    def is_categorical(self) -> bool:
        return self.tag == CATEGORICAL

    def to_dict(self) -> dict:
        out = {"tag": self.tag}
        if self.category_map is not None:
            out["category_map"] = dict(self.category_map)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureKind":
        return cls(obj["tag"], obj.get("category_map"))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x d table with a per-cell missing mask.

    Missing cells hold NaN in ``values``; consumers must go through
    ``missing_mask`` rather than testing for NaN.
    """

    values: np.ndarray
    missing_mask: np.ndarray
    feature_kinds: tuple[FeatureKind, ...]
    feature_names: tuple[str, ...]
    labels: Optional[np.ndarray] = None
    label_name: Optional[str] = None
    label_classes: Optional[tuple[str, ...]] = None
    name: str = "dataset"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.missing_mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DataError("values and missing_mask must be 2-D with equal shape")
        n, d = values.shape
        if len(self.feature_kinds) != d or len(self.feature_names) != d:
            raise DataError("feature_kinds and feature_names must have length d")
        values[mask] = np.nan
        if not np.all(np.isfinite(values[~mask])):
            raise DataError("observed cells must be finite")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "feature_kinds", tuple(self.feature_kinds))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got {labels.shape}")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def is_complete(self) -> bool:
        return not self.missing_mask.any()

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            raise DataError("dataset has no labels")
        return len(np.unique(self.labels))

    def degenerate_features(self) -> list[str]:
        """Names of features without a single observed value."""
        dead = self.missing_mask.all(axis=0)
        return [self.feature_names[j] for j in np.flatnonzero(dead)]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(np.nan_to_num(self.values, nan=0.0)).tobytes())
        h.update(np.packbits(self.missing_mask).tobytes())
        if self.labels is not None:
            h.update(self.labels.tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            np.array_equal(self.missing_mask, other.missing_mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
            and self.feature_kinds == other.feature_kinds
            and self.feature_names == other.feature_names
            and self.label_name == other.label_name
            and self.label_classes == other.label_classes
            and same_labels
        )

    __hash__ = None


def from_array(X, labels=None, *, categorical: Iterable[int] = (), name="array",
               feature_names: Optional[Sequence[str]] = None) -> Dataset:
    """Wrap a float matrix (NaN = missing) into a :class:`Dataset`."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be 2-D")
    cat = set(categorical)
    kinds = []
    for j in range(X.shape[1]):
        if j in cat:
            codes = np.unique(X[~np.isnan(X[:, j]), j])
            kinds.append(FeatureKind(CATEGORICAL, {str(int(c)): int(c) for c in range(int(codes.max()) + 1)}
                                     if codes.size else {}))
        else:
            kinds.append(FeatureKind())
    names = feature_names or [f"x{j}" for j in range(X.shape[1])]
    return Dataset(X, np.isnan(X), kinds, names, labels=labels, name=name)


def _parse_float(text: str) -> Optional[float]:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def load_csv(path, missing_markers: Iterable[str] = DEFAULT_MISSING_MARKERS,
             label_column: Optional[str] = None, name: Optional[str] = None) -> Dataset:
    """Read a headed, comma-separated file into a :class:`Dataset`.

    Columns whose observed cells all parse as numbers are numeric; anything
    else is categorical with codes assigned in first-appearance order. The
    label column, if named, is coded the same way and removed from the
    features.
    """
    markers = frozenset(missing_markers)
    if not markers:
        raise DataError("missing_markers must be nonempty")
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [[cell.strip() for cell in r] for r in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")

    columns = list(zip(*body)) if body else [() for _ in header]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not found in {path}")
        label_idx = header.index(label_column)

    names, kinds, cols, masks = [], [], [], []
    for idx, (col_name, raw) in enumerate(zip(header, columns)):
        if idx == label_idx:
            continue
        miss = np.array([c in markers for c in raw], dtype=bool)
        parsed = [_parse_float(c) for c, m in zip(raw, miss) if not m]
        if all(p is not None for p in parsed):
            vals = np.full(len(raw), np.nan)
            vals[~miss] = parsed
            kind = FeatureKind()
        else:
            cmap: dict[str, int] = {}
            vals = np.full(len(raw), np.nan)
            for i, (c, m) in enumerate(zip(raw, miss)):
                if not m:
                    vals[i] = cmap.setdefault(c, len(cmap))
            kind = FeatureKind(CATEGORICAL, cmap)
        names.append(col_name)
        kinds.append(kind)
        cols.append(vals)
        masks.append(miss)

    labels = classes = None
    if label_idx is not None:
        raw = columns[label_idx]
        if any(c in markers for c in raw):
            raise DataError(f"label column {label_column!r} has missing entries")
        lmap: dict[str, int] = {}
        labels = np.array([lmap.setdefault(c, len(lmap)) for c in raw], dtype=np.int64)
        classes = tuple(lmap)

    n = len(body)
    values = np.column_stack(cols) if cols else np.empty((n, 0))
    mask = np.column_stack(masks) if masks else np.empty((n, 0), dtype=bool)
    ds = Dataset(values, mask, kinds, names, labels=labels, label_name=label_column,
                 label_classes=classes, name=name or path.stem,
                 provenance={"source": str(path)})
    dead = ds.degenerate_features()
    if dead:
        raise DataError(f"features with no observed values: {', '.join(dead)}")
    return ds


def _format_cell(value: float, kind: FeatureKind, inverse: Optional[dict[int, str]]) -> str:
    if kind.is_categorical:
        return inverse[int(value)]
    return repr(float(value))


def save_dataset(ds: Dataset, path, marker: str = "?") -> Path:
    """Write ``ds`` as CSV plus a ``.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    header = list(ds.feature_names)
    if ds.labels is not None:
        header.append(ds.label_name or "label")
    inverses = [{v: k for k, v in kind.category_map.items()} if kind.is_categorical else None
                for kind in ds.feature_kinds]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [marker if ds.missing_mask[i, j]
                   else _format_cell(ds.values[i, j], ds.feature_kinds[j], inverses[j])
                   for j in range(ds.d)]
            if ds.labels is not None:
                lab = ds.labels[i]
                row.append(ds.label_classes[lab] if ds.label_classes else str(int(lab)))
            w.writerow(row)
    meta = {
        "name": ds.name,
        "missing_marker": marker,
        "feature_names": list(ds.feature_names),
        "feature_kinds": [k.to_dict() for k in ds.feature_kinds],
        "label_column": ds.label_name if ds.labels is not None else None,
        "label_classes": list(ds.label_classes) if ds.label_classes else None,
        "provenance": ds.provenance,
        "content_hash": ds.content_hash(),
    }
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return sidecar


def read_dataset(path) -> Dataset:
    """Inverse of :func:`save_dataset`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    kinds = [FeatureKind.from_dict(k) for k in meta["feature_kinds"]]
    label_col = meta["label_column"]
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n, d = len(body), len(kinds)
    values = np.full((n, d), np.nan)
    mask = np.zeros((n, d), dtype=bool)
    for i, r in enumerate(body):
        for j, kind in enumerate(kinds):
            cell = r[j]
            if cell == meta["missing_marker"]:
                mask[i, j] = True
            elif kind.is_categorical:
                values[i, j] = kind.category_map[cell]
            else:
                values[i, j] = float(cell)
    labels = classes = None
    if label_col is not None:
        classes = meta["label_classes"]
        if classes:
            lookup = {c: k for k, c in enumerate(classes)}
            labels = np.array([lookup[r[d]] for r in body], dtype=np.int64)
            classes = tuple(classes)
        else:
            labels = np.array([int(r[d]) for r in body], dtype=np.int64)
    return Dataset(values, mask, kinds, meta["feature_names"], labels=labels,
                   label_name=label_col, label_classes=classes, name=meta["name"],
                   provenance=meta["provenance"])


def inject_mcar(ds: Dataset, rate: float, seed: int, max_retries: int = 1000) -> Dataset:
    """Mask every cell independently with probability ``rate``.

    Cells of rows or columns that end up fully masked are redrawn (only those
    cells) until every sample and every feature keeps an observed value.
    """
    if not 0.0 <= rate <= 1.0:
        raise DataError(f"rate must be in [0, 1], got {rate}")
    if not ds.is_complete:
        raise DataError("inject_mcar expects a fully observed dataset")
    rng = np.random.default_rng(seed)
    n, d = ds.n, ds.d
    mask = rng.random((n, d)) < rate
    for _ in range(max_retries):
        bad_rows = np.flatnonzero(mask.all(axis=1))
        bad_cols = np.flatnonzero(mask.all(axis=0))
        if bad_rows.size == 0 and bad_cols.size == 0:
            break
        if bad_rows.size:
            mask[bad_rows] = rng.random((bad_rows.size, d)) < rate
        if bad_cols.size:
            mask[:, bad_cols] = rng.random((n, bad_cols.size)) < rate
    else:
        raise DataError(f"could not keep every row and column observed at rate {rate} "
                        f"after {max_retries} redraws")
    provenance = dict(ds.provenance, mcar_rate=rate, mcar_seed=seed)
    return replace(ds, values=np.where(mask, np.nan, ds.values), missing_mask=mask,
                   provenance=provenance)
