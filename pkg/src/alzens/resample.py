"""SMOTE oversampling, Tomek-link detection and the combined cleaner.

Runs on the (already standardized) training table only. Neighbour search
is exact brute force on squared Euclidean distance, chunked to bound memory.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import Table, class_counts
from .errors import DataError, TooFewMinority

_CHUNK = 512


@dataclass(frozen=True)
class ResamplePlan:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    link_removal: str = "majority_only"
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise DataError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise DataError("target_ratio must be in (0, 1]")
        if self.link_removal not in ("majority_only", "both"):
            raise DataError(f"unknown link_removal policy {self.link_removal!r}")


def _minority_majority(labels: np.ndarray) -> tuple[int, int]:
    n1 = int(labels.sum())
    n0 = labels.size - n1
    return (1, 0) if n1 < n0 else (0, 1)


def _knn(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows, distance ties broken toward lower index."""
    out = np.empty((X.shape[0], k), dtype=np.int64)
    for start in range(0, X.shape[0], _CHUNK):
        d = cdist(X[start : start + _CHUNK], X, "sqeuclidean")
        rows = np.arange(d.shape[0])
        d[rows, rows + start] = np.inf
        out[start : start + d.shape[0]] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def synthesize(base: np.ndarray, neighbor: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Points ``base + u * (neighbor - base)`` row-wise."""
    return base + np.asarray(u)[:, None] * (neighbor - base)


def smote(train: Table, plan: ResamplePlan = ResamplePlan(), return_parents: bool = False):
    """Append synthetic minority rows until minority/majority reaches ``plan.target_ratio``.

    With ``return_parents`` also returns a ``(n_synthetic, 2)`` array of the
    (base, neighbour) row indices each synthetic row was interpolated from.
    """
    labels = train.require_labels()
    minority, majority = _minority_majority(labels)
    min_idx = np.flatnonzero(labels == minority)
    n_maj = int(np.count_nonzero(labels == majority))
    n_new = max(0, int(np.floor(plan.target_ratio * n_maj + 0.5)) - min_idx.size)
    parents = np.empty((0, 2), dtype=np.int64)
    if n_new == 0:
        return (train, parents) if return_parents else train
    if min_idx.size < plan.k_neighbors + 1:
        raise TooFewMinority(
            f"minority class has {min_idx.size} rows; k_neighbors={plan.k_neighbors} needs at least "
            f"{plan.k_neighbors + 1}"
        )
    X_min = train.rows[min_idx]
    nn = _knn(X_min, plan.k_neighbors)
    rng = np.random.default_rng(plan.seed)
    base = rng.integers(0, min_idx.size, n_new)
    pick = rng.integers(0, plan.k_neighbors, n_new)
    u = rng.random(n_new)
    nbr = nn[base, pick]
    synthetic = synthesize(X_min[base], X_min[nbr], u)
    rows = np.vstack([train.rows, synthetic])
    new_labels = np.concatenate([labels, np.full(n_new, minority)])
    ids = None
    if train.row_ids is not None:
        ids = train.row_ids + tuple(f"smote-{i}" for i in range(n_new))
    parents = np.column_stack([min_idx[base], min_idx[nbr]])
    out = train.replace(rows=rows, labels=new_labels, row_ids=ids)
    return (out, parents) if return_parents else out


def nearest_neighbors(X: np.ndarray) -> np.ndarray:
    """1-NN of every row among the other rows (ties toward lower index)."""
    return _knn(X, 1)[:, 0]


def tomek_links(table: Table) -> list[tuple[int, int]]:
    """Opposite-label mutual nearest-neighbour pairs ``(i, j)`` with ``i < j``."""
    labels = table.require_labels()
    if table.n_samples < 2:
        raise DataError("tomek_links needs at least 2 rows")
    nn = nearest_neighbors(table.rows)
    links = []
    for i, j in enumerate(nn):
        if i < j and nn[j] == i and labels[i] != labels[j]:
            links.append((i, int(j)))
    return links


def smote_tomek(train: Table, plan: ResamplePlan = ResamplePlan()) -> tuple[Table, dict]:
    """SMOTE, then drop Tomek-link members per ``plan.link_removal``.

    Returns the cleaned table and a report of class counts at each stage.
    """
    labels = train.require_labels()
    _, majority = _minority_majority(labels)
    before = class_counts(train)
    oversampled = smote(train, plan)
    links = tomek_links(oversampled)
    y = oversampled.labels
    remove = set()
    for i, j in links:
        if plan.link_removal == "both":
            remove.update((i, j))
        else:
            remove.add(i if y[i] == majority else j)
    keep = np.array([i for i in range(oversampled.n_samples) if i not in remove], dtype=np.int64)
    cleaned = oversampled.take(keep)
    report = {
        "plan": asdict(plan),
        "before": _str_keys(before),
        "after_smote": _str_keys(class_counts(oversampled)),
        "links_found": len(links),
        "links_removed": len(remove),
        "after": _str_keys(class_counts(cleaned)),
        "removed_rows": sorted(remove),
    }
    return cleaned, report


def _str_keys(d: dict) -> dict:
    return {str(k): v for k, v in d.items()}
