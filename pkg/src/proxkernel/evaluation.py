"""Clustering evaluation: k-means, NMI, the mean-imputation baseline and sweeps."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .binning import assign_all, fit_bin_centers
from .dataset import DataError, Dataset, FeatureKind, inject_mcar
from .encoder import encode_bins, encode_dataset, global_prior
from .estimator import MeanModeImputer

SCHEMA_VERSION = 1
METHODS = {"pk": "pk", "PK": "pk", "mean": "mean", "MeanImpute": "mean"}


@dataclass
class ClusteringResult:
    labels: np.ndarray
    inertia: float
    n_iter: int
    seed: int
    history: list = field(default_factory=list)


def _sq_dists(X, centers):
    d2 = (X * X).sum(axis=1)[:, None] - 2.0 * X @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def _seed_centers(X, k, rng):
    """Distance-weighted (k-means++) seeding."""
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def _lloyd(X, centers, max_iter):
    n, k = X.shape[0], centers.shape[0]
    rows = np.arange(n)
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, centers)
        new = d2.argmin(axis=1)
        history.append(float(d2[rows, new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        onehot = sp.csr_matrix((np.ones(n), (labels, rows)), shape=(k, n))
        counts = np.asarray(onehot.sum(axis=1)).ravel()
        sums = np.asarray(onehot @ X)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            # move empty clusters onto the worst-fitted points
            far = np.argsort(-d2[rows, labels], kind="stable")[: (~filled).sum()]
            centers[~filled] = X[far]
    return labels, centers, it, history


def kmeans(points, n_clusters: int, seed: int = 0, restarts: int = 10,
           max_iter: int = 300) -> ClusteringResult:
    """Lloyd's algorithm with k-means++ seeding; the best of ``restarts`` runs wins."""
    X = np.asarray(points.toarray() if sp.issparse(points) else points, dtype=float)
    n = X.shape[0]
    if not 1 <= n_clusters <= n:
        raise DataError(f"need 1 <= n_clusters <= n ({n}), got {n_clusters}")
    if not np.all(np.isfinite(X)):
        raise DataError("points must be finite")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centers = _seed_centers(X, n_clusters, rng)
        labels, centers, n_iter, history = _lloyd(X, centers, max_iter)
        inertia = float(((X - centers[labels]) ** 2).sum())
        if best is None or inertia < best.inertia:
            best = ClusteringResult(labels, inertia, n_iter, seed, history)
    return best


def nmi(pred, truth) -> float:
    """Normalized mutual information, arithmetic-mean normalization."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"label arrays differ in length: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty label arrays")
    _, a = np.unique(pred, return_inverse=True)
    _, b = np.unique(truth, return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1.0)
    pij = table / pred.size
    pa, pb = pij.sum(axis=1), pij.sum(axis=0)
    ha = -np.sum(pa * np.log(pa))
    hb = -np.sum(pb * np.log(pb))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    nz = pij > 0
    mi = np.sum(pij[nz] * np.log(pij[nz] / np.outer(pa, pb)[nz]))
    return float(np.clip(mi / ((ha + hb) / 2.0), 0.0, 1.0))


def mean_impute(ds: Dataset) -> np.ndarray:
    cats = [j for j, k in enumerate(ds.feature_kinds) if k.is_categorical]
    return MeanModeImputer(categorical_features=cats).fit_transform(ds.values)


def minmax_scale(X: np.ndarray) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (X - lo) / span


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "pk"
    n_bins: int = 4
    runs: int = 10
    seed: int = 0
    restarts: int = 10
    max_iter: int = 300

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose pk or mean")
        object.__setattr__(self, "method", METHODS[self.method])
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


@dataclass
class ExperimentReport:
    dataset: str
    method: str
    n_bins: Optional[int]
    rate: Optional[float]
    runs: list
    seeds: list
    mean_nmi: float
    std_nmi: float
    config: dict
    dataset_hash: str
    n: int
    d: int
    n_classes: int
    fallback_levels: Optional[dict] = None
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary_row(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "n_bins": "" if self.n_bins is None else self.n_bins,
            "rate": "" if self.rate is None else self.rate,
            "mean_nmi": f"{self.mean_nmi:.6f}",
            "std_nmi": f"{self.std_nmi:.6f}",
            "time": f"{self.timing.get('total_s', 0.0):.4f}",
        }


def run_experiment(ds: Dataset, config: ExperimentConfig) -> ExperimentReport:
    """Cluster ``config.runs`` times with seeds ``seed + r`` and score each run by NMI."""
    if ds.labels is None:
        raise DataError(f"dataset {ds.name!r} has no labels")
    k = ds.n_classes
    levels = None
    t0 = time.perf_counter()
    if config.method == "pk":
        rep = encode_dataset(ds, n_bins=config.n_bins)
        points = rep.toarray()
        levels = rep.level_counts()
    else:
        points = minmax_scale(mean_impute(ds))
    t1 = time.perf_counter()
    seeds = [config.seed + r for r in range(config.runs)]
    scores = [nmi(kmeans(points, k, seed=s, restarts=config.restarts,
                         max_iter=config.max_iter).labels, ds.labels) for s in seeds]
    t2 = time.perf_counter()
    return ExperimentReport(
        dataset=ds.name,
        method=config.method,
        n_bins=config.n_bins if config.method == "pk" else None,
        rate=ds.provenance.get("mcar_rate"),
        runs=scores,
        seeds=seeds,
        mean_nmi=float(np.mean(scores)),
        std_nmi=float(np.std(scores)),
        config=asdict(config),
        dataset_hash=ds.content_hash(),
        n=ds.n,
        d=ds.d,
        n_classes=k,
        fallback_levels=levels,
        timing={"prepare_s": t1 - t0, "cluster_s": t2 - t1, "total_s": t2 - t0,
                "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat()},
    )


def _dedupe(values: Iterable) -> list:
    return list(dict.fromkeys(values))


def sensitivity_sweep(ds: Dataset, bin_counts: Sequence[int],
                      config: ExperimentConfig = ExperimentConfig()) -> list[ExperimentReport]:
    return [run_experiment(ds, ExperimentConfig(**dict(asdict(config), method="pk", n_bins=b)))
            for b in _dedupe(bin_counts)]


def tune_bins(ds: Dataset, grid: Sequence[int] = (2, 3, 4, 6, 8),
              config: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Best report (highest mean NMI) over a grid of bin counts."""
    reports = sensitivity_sweep(ds, grid, config)
    return max(reports, key=lambda r: r.mean_nmi)


def missing_rate_sweep(ds: Dataset, rates: Sequence[float],
                       config: ExperimentConfig = ExperimentConfig(),
                       mcar_seed: Optional[int] = None) -> list[ExperimentReport]:
    """Inject MCAR at each rate (seeded) and run the experiment."""
    if ds.labels is None:
        raise DataError(f"dataset {ds.name!r} has no labels")
    if not ds.is_complete:
        raise DataError("missing-rate sweeps need a fully observed dataset")
    seed = config.seed if mcar_seed is None else mcar_seed
    return [run_experiment(inject_mcar(ds, rate, seed), config) for rate in rates]


def trend_is_declining(reports: Sequence[ExperimentReport]) -> bool:
    """Whether mean NMI never increases as the missing rate grows (reported only)."""
    ordered = sorted(reports, key=lambda r: r.rate or 0.0)
    means = [r.mean_nmi for r in ordered]
    return all(b <= a for a, b in zip(means, means[1:]))


@dataclass(frozen=True)
class SyntheticSpec:
    d: int = 20
    missing_rate: float = 0.1
    n_clusters: int = 5
    seed: int = 0


def make_synthetic(n: int, spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    """Gaussian blobs with MCAR missingness."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(scale=4.0, size=(spec.n_clusters, spec.d))
    labels = rng.integers(spec.n_clusters, size=n)
    X = centers[labels] + rng.normal(size=(n, spec.d))
    ds = Dataset(X, np.zeros_like(X, dtype=bool), [FeatureKind()] * spec.d,
                 [f"x{j}" for j in range(spec.d)], labels=labels, name=f"synthetic-{n}")
    return inject_mcar(ds, spec.missing_rate, spec.seed + 1)


def time_encode(ds: Dataset, n_bins: int, repeats: int = 3) -> dict:
    """Best-of-``repeats`` wall times for fitting centers and for encoding."""
    fit_t, enc_t = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model = fit_bin_centers(ds, n_bins)
        t1 = time.perf_counter()
        assignments = assign_all(ds, model)
        rep = encode_bins(assignments, assignments, global_prior(assignments), exclude_self=True)
        t2 = time.perf_counter()
        fit_t.append(t1 - t0)
        enc_t.append(t2 - t1)
    i = int(np.argmin(np.add(fit_t, enc_t)))
    return {"fit_s": fit_t[i], "encode_s": enc_t[i], "total_s": fit_t[i] + enc_t[i],
            "nnz": int(rep.z.nnz), "nbytes": rep.nbytes()}


def scaling_bench(sizes: Sequence[int], spec: SyntheticSpec = SyntheticSpec(),
                  n_bins: int = 4, repeats: int = 3) -> list[dict]:
    """Fit + encode wall times on synthetic data, one row per size, sorted by n."""
    sizes = sorted(_dedupe(int(s) for s in sizes))
    # warm-up so compilation and caches are not billed to the first size
    time_encode(make_synthetic(min(sizes[0], 256), spec), n_bins, repeats=1)
    rows = []
    for n in sizes:
        ds = make_synthetic(n, spec)
        rows.append({"n": n, "d": spec.d, "missing_rate": spec.missing_rate, "n_bins": n_bins,
                     **time_encode(ds, n_bins, repeats)})
    return rows


def reports_to_json(reports: Sequence[ExperimentReport], run_config: Optional[dict] = None) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "run_config": run_config or {},
               "reports": [r.to_dict() for r in reports]}
    return json.dumps(payload, indent=2, sort_keys=True)


def write_reports(reports: Sequence[ExperimentReport], json_path=None, csv_path=None,
                  run_config: Optional[dict] = None) -> None:
    if json_path is not None:
        Path(json_path).write_text(reports_to_json(reports, run_config) + "\n")
    if csv_path is not None:
        write_rows([r.summary_row() for r in reports], csv_path)


def write_rows(rows: Sequence[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
