"""Tabular data carrier, CSV I/O and leakage-safe stratified splitting."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadFraction,
    DataError,
    DegenerateClass,
    MissingTarget,
    MissingValue,
    NoLabels,
    NonNumericCell,
    StageInputMissing,
)

CLASSES = (0, 1)


@dataclass(frozen=True, eq=False)
class Table:
    """Column-named numeric feature matrix with an optional binary label vector.

    Arrays are stored read-only so a table can be shared freely; every
    operation that changes data returns a new table.
    """

    column_names: tuple
    rows: np.ndarray
    labels: np.ndarray | None = None
    row_ids: tuple | None = None
    target_name: str = "label"
    allow_missing: bool = False

    def __post_init__(self):
        names = tuple(str(c) for c in self.column_names)
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(names))
        if rows.ndim != 2 or rows.shape[1] != len(names):
            raise DataError(f"rows shape {rows.shape} does not match {len(names)} column names")
        if len(set(names)) != len(names):
            dupes = sorted({c for c in names if names.count(c) > 1})
            raise DataError(f"duplicate column names: {dupes}")
        if np.isinf(rows).any():
            raise DataError("table contains infinite values")
        if not self.allow_missing and np.isnan(rows).any():
            raise DataError("table contains NaN values")
        rows.flags.writeable = False
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (rows.shape[0],):
                raise DataError(f"{labels.shape[0] if labels.ndim else 0} labels for {rows.shape[0]} rows")
            if labels.size and not np.isin(labels, CLASSES).all():
                raise DataError("labels must be 0 or 1")
            labels = labels.astype(np.int64)
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)
        if self.row_ids is not None:
            ids = tuple(str(r) for r in self.row_ids)
            if len(ids) != rows.shape[0]:
                raise DataError("row_ids length does not match rows")
            object.__setattr__(self, "row_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]

    def require_labels(self) -> np.ndarray:
        if self.labels is None or self.labels.size == 0:
            raise NoLabels("table has no labels")
        return self.labels

    def take(self, indices) -> "Table":
        idx = np.asarray(indices, dtype=np.int64)
        return Table(
            self.column_names,
            self.rows[idx],
            None if self.labels is None else self.labels[idx],
            None if self.row_ids is None else tuple(self.row_ids[i] for i in idx),
            self.target_name,
            self.allow_missing,
        )

    def replace(self, rows=None, column_names=None, labels=..., row_ids=..., allow_missing=None) -> "Table":
        return Table(
            self.column_names if column_names is None else column_names,
            self.rows if rows is None else rows,
            self.labels if labels is ... else labels,
            self.row_ids if row_ids is ... else row_ids,
            self.target_name,
            self.allow_missing if allow_missing is None else allow_missing,
        )

    def fingerprint(self) -> str:
        """SHA-256 over names, cell bytes and labels; identifies the data a statistic was fitted on."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.column_names).encode())
        h.update(np.ascontiguousarray(self.rows).tobytes())
        if self.labels is not None:
            h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def _parse_cell(text: str, row: int, column: str) -> float:
    text = text.strip()
    if text == "":
        raise MissingValue(row, column)
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row, column, text) from None
    if math.isinf(value):
        raise NonNumericCell(row, column, text)
    return value


def load_csv(
    path,
    target_column: str | None,
    drop_columns: Iterable[str] = (),
    id_column: str | None = None,
    allow_missing: bool = False,
) -> Table:
    """Read a header-first UTF-8 CSV into a :class:`Table`.

    ``drop_columns`` are discarded (identifiers never reach a model);
    ``id_column`` is kept aside as ``row_ids``. With ``allow_missing`` empty
    cells become NaN and must be imputed downstream.
    """
    path = Path(path)
    if not path.exists():
        raise StageInputMissing(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        body = [r for r in reader if r]
    if target_column is not None and target_column not in header:
        raise MissingTarget(f"target column {target_column!r} not in header of {path}")
    drop = set(drop_columns)
    feature_pos = [
        i for i, h in enumerate(header) if h not in drop and h != target_column and h != id_column
    ]
    names = [header[i] for i in feature_pos]
    rows = np.empty((len(body), len(names)))
    labels = None if target_column is None else np.empty(len(body), dtype=np.int64)
    ids = [] if id_column is not None else None
    t_pos = header.index(target_column) if target_column is not None else None
    id_pos = header.index(id_column) if id_column is not None else None
    for r, record in enumerate(body):
        if len(record) != len(header):
            raise DataError(f"{path}: row {r} has {len(record)} cells, header has {len(header)}")
        for j, pos in enumerate(feature_pos):
            try:
                rows[r, j] = _parse_cell(record[pos], r, header[pos])
            except MissingValue:
                if not allow_missing:
                    raise
                rows[r, j] = np.nan
        if t_pos is not None:
            y = _parse_cell(record[t_pos], r, target_column)
            if y not in (0.0, 1.0):
                raise DataError(f"row {r}: label {record[t_pos]!r} is not 0 or 1")
            labels[r] = int(y)
        if ids is not None:
            ids.append(record[id_pos])
    return Table(names, rows, labels, ids, target_column or "label", allow_missing)


def save_csv(table: Table, path) -> None:
    """Write a table with full float precision (``repr``) so a reload is bit-exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(table.column_names)
        if table.row_ids is not None:
            header = ["row_id"] + header
        if table.labels is not None:
            header.append(table.target_name)
        w.writerow(header)
        for i in range(table.n_samples):
            rec = [repr(float(v)) if not np.isnan(v) else "" for v in table.rows[i]]
            if table.row_ids is not None:
                rec.insert(0, table.row_ids[i])
            if table.labels is not None:
                rec.append(str(int(table.labels[i])))
            w.writerow(rec)


def load_table_csv(path, target_column: str = "label") -> Table:
    """Reload a table written by :func:`save_csv`."""
    path = Path(path)
    if not path.exists():
        raise StageInputMissing(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    target = target_column if target_column in header else None
    id_col = "row_id" if "row_id" in header else None
    return load_csv(path, target, id_column=id_col)


def class_counts(table: Table) -> dict[int, int]:
    labels = table.require_labels()
    return {c: int(np.count_nonzero(labels == c)) for c in CLASSES}


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int = 0
    fractions: tuple = field(default=(0.15, 0.15))

    def to_dict(self) -> dict:
        return {
            "train": [int(i) for i in self.train],
            "validation": [int(i) for i in self.validation],
            "test": [int(i) for i in self.test],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SplitIndices":
        return cls(*(np.asarray(d[k], dtype=np.int64) for k in ("train", "validation", "test")))

    @classmethod
    def from_json(cls, text: str) -> "SplitIndices":
        return cls.from_dict(json.loads(text))

    def report(self, table: Table) -> dict:
        out = {}
        for name in ("train", "validation", "test"):
            idx = getattr(self, name)
            counts = class_counts(table.take(idx)) if table.labels is not None else {}
            out[name] = {"size": int(len(idx)), "class_counts": {str(k): v for k, v in counts.items()}}
        return out


def _largest_remainder(total: int, quotas: Sequence[float]) -> list[int]:
    """Integer allocation of ``total`` along ``quotas``; ties go to the earlier slot."""
    floors = [math.floor(q + 1e-9) for q in quotas]
    left = total - sum(floors)
    rema = [round(q - f, 9) for q, f in zip(quotas, floors)]
    order = sorted(range(len(quotas)), key=lambda i: (-rema[i], i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def _class_members(table: Table, min_per_class: int) -> list[np.ndarray]:
    labels = table.require_labels()
    members = []
    for c in CLASSES:
        idx = np.flatnonzero(labels == c)
        if idx.size < min_per_class:
            raise DegenerateClass(f"class {c} has {idx.size} members, need at least {min_per_class}")
        members.append(idx)
    return members


def stratified_two_stage_split(
    table: Table, test_fraction: float = 0.15, validation_fraction: float = 0.15, seed: int = 0
) -> SplitIndices:
    """Carve test, then validation, out of each shuffled class.

    Both fractions are of the original table (0.15/0.15 leaves 70% for
    training). Per-class counts are allocated by largest remainder with
    ties resolved test-first, so every split is within one row of its
    proportional share.
    """
    for f in (test_fraction, validation_fraction):
        if not 0.0 < f < 1.0:
            raise BadFraction(f"fraction {f} not in (0, 1)")
    if test_fraction + validation_fraction >= 1.0:
        raise BadFraction("test_fraction + validation_fraction must be < 1")
    members = _class_members(table, 2)
    rng = np.random.default_rng(seed)
    parts = {"test": [], "validation": [], "train": []}
    train_fraction = 1.0 - test_fraction - validation_fraction
    for idx in members:
        n = idx.size
        n_test, n_val, _ = _largest_remainder(
            n, [n * test_fraction, n * validation_fraction, n * train_fraction]
        )
        shuffled = rng.permutation(idx)
        parts["test"].append(shuffled[:n_test])
        parts["validation"].append(shuffled[n_test : n_test + n_val])
        parts["train"].append(shuffled[n_test + n_val :])
    merged = {k: np.sort(np.concatenate(v)) for k, v in parts.items()}
    return SplitIndices(
        merged["train"], merged["validation"], merged["test"], seed, (test_fraction, validation_fraction)
    )


def stratified_kfold(table: Table, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """``k`` (train, held-out) index pairs; each row is held out exactly once."""
    if k < 2:
        raise DataError("k must be at least 2")
    members = _class_members(table, k)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(table.n_samples, dtype=np.int64)
    pos = 0
    # deal shuffled members round-robin, continuing the counter across classes
    for idx in members:
        shuffled = rng.permutation(idx)
        fold_of[shuffled] = (np.arange(shuffled.size) + pos) % k
        pos += shuffled.size
    everything = np.arange(table.n_samples)
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]
