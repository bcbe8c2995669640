"""Train-fitted feature pipeline: impute, clip, engineer, prune, standardize.

Every statistic is computed from the training table once and frozen into a
:class:`FittedTransform`; ``apply`` replays it on any other split without
looking at that split's distribution.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import Table
from .errors import DataError, MissingColumn, SchemaMismatch

EPSILON = 1e-6
CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class Recipe:
    """One engineered column: ``left*right``, ``left/(right+eps)`` or ``left**power``."""

    name: str
    op: str
    left: str
    right: str | None = None
    power: int = 2

    def __post_init__(self):
        if self.op not in ("product", "ratio", "power"):
            raise DataError(f"unknown recipe op {self.op!r}")
        if self.op != "power" and self.right is None:
            raise DataError(f"recipe {self.name!r} needs a right-hand column")

    @property
    def sources(self) -> tuple:
        return (self.left,) if self.op == "power" else (self.left, self.right)


DEFAULT_INTERACTIONS = (
    Recipe("BMI_x_Age", "product", "BMI", "Age"),
    Recipe("MMSE_x_FunctionalAssessment", "product", "MMSE", "FunctionalAssessment"),
    Recipe("BloodPressureProduct", "product", "SystolicBP", "DiastolicBP"),
    Recipe("MMSE_x_ADL", "product", "MMSE", "ADL"),
    Recipe("FunctionalAssessment_x_Age", "product", "FunctionalAssessment", "Age"),
    Recipe("CholesterolLDL_x_CholesterolHDL", "product", "CholesterolLDL", "CholesterolHDL"),
    Recipe("MMSE_over_PA", "ratio", "MMSE", "PhysicalActivity"),
    Recipe("SleepQuality_over_Age", "ratio", "SleepQuality", "Age"),
)
DEFAULT_POLYNOMIALS = (
    Recipe("Age_sq", "power", "Age", power=2),
    Recipe("BMI_sq", "power", "BMI", power=2),
    Recipe("MMSE_sq", "power", "MMSE", power=2),
)


@dataclass(frozen=True)
class TransformOptions:
    impute: bool = False
    clip: bool = True
    clip_skip_binary: bool = True
    interactions: tuple = DEFAULT_INTERACTIONS
    polynomials: tuple = DEFAULT_POLYNOMIALS
    prune_threshold: float | None = 0.95
    standardize: bool = True
    epsilon: float = EPSILON

    @classmethod
    def disabled(cls) -> "TransformOptions":
        return cls(clip=False, interactions=(), polynomials=(), prune_threshold=None, standardize=False)


@dataclass(frozen=True)
class FittedTransform:
    input_columns: tuple
    impute_medians: dict = field(default_factory=dict)
    clip_bounds: dict = field(default_factory=dict)
    interaction_recipes: tuple = ()
    polynomial_recipes: tuple = ()
    epsilon: float = EPSILON
    dropped_columns: tuple = ()
    standardization: dict = field(default_factory=dict)
    output_columns: tuple = ()
    fit_fingerprint: str = ""

    def apply(self, table: Table) -> Table:
        return apply(self, table)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interaction_recipes"] = [asdict(r) for r in self.interaction_recipes]
        d["polynomial_recipes"] = [asdict(r) for r in self.polynomial_recipes]
        d["clip_bounds"] = {k: list(v) for k, v in self.clip_bounds.items()}
        d["standardization"] = {k: list(v) for k, v in self.standardization.items()}
        for k in ("input_columns", "dropped_columns", "output_columns"):
            d[k] = list(d[k])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedTransform":
        return cls(
            input_columns=tuple(d["input_columns"]),
            impute_medians=dict(d["impute_medians"]),
            clip_bounds={k: tuple(v) for k, v in d["clip_bounds"].items()},
            interaction_recipes=tuple(Recipe(**r) for r in d["interaction_recipes"]),
            polynomial_recipes=tuple(Recipe(**r) for r in d["polynomial_recipes"]),
            epsilon=float(d["epsilon"]),
            dropped_columns=tuple(d["dropped_columns"]),
            standardization={k: tuple(v) for k, v in d["standardization"].items()},
            output_columns=tuple(d["output_columns"]),
            fit_fingerprint=d["fit_fingerprint"],
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedTransform":
        return cls.from_dict(json.loads(text))


def _require(table: Table, names) -> None:
    missing = [n for n in names if n not in table.column_names]
    if missing:
        raise MissingColumn(f"columns not in table: {missing}")


def engineer_features(table: Table, recipes, epsilon: float = EPSILON) -> Table:
    """Append one column per recipe; a recipe whose output already exists is recomputed in place."""
    recipes = tuple(recipes)
    _require(table, [s for r in recipes for s in r.sources])
    names = list(table.column_names)
    cols = [table.rows[:, j] for j in range(table.n_features)]
    for r in recipes:
        a = table.column(r.left)
        if r.op == "product":
            new = a * table.column(r.right)
        elif r.op == "ratio":
            new = a / (table.column(r.right) + epsilon)
        else:
            new = a ** r.power
        if r.name in names:
            cols[names.index(r.name)] = new
        else:
            names.append(r.name)
            cols.append(new)
    rows = np.column_stack(cols) if cols else np.empty((table.n_samples, 0))
    return table.replace(rows=rows, column_names=names)


def clip_outliers(train: Table, columns=None) -> dict:
    """Per-column ``[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`` with linearly interpolated quartiles."""
    columns = train.column_names if columns is None else tuple(columns)
    bounds = {}
    for name in columns:
        x = train.column(name)
        x = x[~np.isnan(x)]
        q1, q3 = np.quantile(x, [0.25, 0.75])
        iqr = q3 - q1
        bounds[name] = (float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr))
    return bounds


def apply_clip(table: Table, bounds: dict) -> Table:
    if not bounds:
        return table
    rows = np.array(table.rows)
    for name, (lo, hi) in bounds.items():
        j = table.column_names.index(name)
        rows[:, j] = np.clip(rows[:, j], lo, hi)
    return table.replace(rows=rows)


def correlation_matrix(rows: np.ndarray) -> np.ndarray:
    """Pearson r between columns; any pair involving a constant column gets 0."""
    centered = rows - rows.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    constant = np.ptp(rows, axis=0) == 0
    norms[constant] = 1.0
    r = (centered.T @ centered) / np.outer(norms, norms)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    return np.clip(r, -1.0, 1.0)


def prune_correlated(train: Table, threshold: float = 0.95) -> list[str]:
    """Column-order scan: drop column j if |r| with any earlier column exceeds ``threshold``.

    Earlier columns count whether or not they were dropped themselves, so
    originals (which come first) are kept in preference to engineered ones.
    """
    if train.n_samples < 2:
        raise DataError("correlation pruning needs at least 2 rows")
    if not 0.0 < threshold <= 1.0:
        raise DataError(f"threshold {threshold} not in (0, 1]")
    r = np.abs(correlation_matrix(train.rows))
    return [
        train.column_names[j] for j in range(train.n_features) if np.any(r[:j, j] > threshold)
    ]


def _standardize(table: Table, stats: dict) -> Table:
    rows = np.array(table.rows)
    for j, name in enumerate(table.column_names):
        mean, std = stats[name]
        rows[:, j] = (rows[:, j] - mean) / (std if std >= CONSTANT_STD else 1.0)
    return table.replace(rows=rows)


def _drop(table: Table, dropped) -> Table:
    if not dropped:
        return table
    keep = [j for j, c in enumerate(table.column_names) if c not in set(dropped)]
    return table.replace(rows=table.rows[:, keep], column_names=[table.column_names[j] for j in keep])


def _impute(table: Table, medians: dict) -> Table:
    if not table.allow_missing:
        return table
    rows = np.array(table.rows)
    for j, name in enumerate(table.column_names):
        nan = np.isnan(rows[:, j])
        if nan.any():
            rows[nan, j] = medians[name]
    return table.replace(rows=rows, allow_missing=False)


def fit_transform(train: Table, options: TransformOptions | None = None) -> tuple[FittedTransform, Table]:
    """Fit every stage on ``train`` (clip, engineer, prune, standardize) and return the transformed table."""
    options = options or TransformOptions()
    train.require_labels()
    recipes = tuple(options.interactions) + tuple(options.polynomials)
    _require(train, [s for r in recipes for s in r.sources])
    medians = {}
    if options.impute:
        medians = {c: float(np.nanmedian(train.column(c))) for c in train.column_names}
    elif train.allow_missing and np.isnan(train.rows).any():
        raise DataError("training table has missing values and imputation is disabled")
    t = _impute(train, medians)
    bounds = {}
    if options.clip:
        cols = [
            c for c in t.column_names
            if not (options.clip_skip_binary and np.unique(t.column(c)).size <= 2)
        ]
        bounds = clip_outliers(t, cols)
        t = apply_clip(t, bounds)
    t = engineer_features(t, recipes, options.epsilon)
    dropped = prune_correlated(t, options.prune_threshold) if options.prune_threshold else []
    t = _drop(t, dropped)
    stats = {}
    if options.standardize:
        stats = {c: (float(t.column(c).mean()), float(t.column(c).std())) for c in t.column_names}
        t = _standardize(t, stats)
    fitted = FittedTransform(
        input_columns=train.column_names,
        impute_medians=medians,
        clip_bounds=bounds,
        interaction_recipes=tuple(options.interactions),
        polynomial_recipes=tuple(options.polynomials),
        epsilon=options.epsilon,
        dropped_columns=tuple(dropped),
        standardization=stats,
        output_columns=t.column_names,
        fit_fingerprint=train.fingerprint(),
    )
    return fitted, t


def apply(fitted: FittedTransform, table: Table) -> Table:
    """Replay ``fitted`` on ``table``; nothing is re-estimated from ``table``."""
    if set(table.column_names) != set(fitted.input_columns):
        missing = sorted(set(fitted.input_columns) - set(table.column_names))
        extra = sorted(set(table.column_names) - set(fitted.input_columns))
        raise SchemaMismatch(f"schema differs from fit time: missing={missing} extra={extra}")
    if table.column_names != fitted.input_columns:
        order = [table.column_names.index(c) for c in fitted.input_columns]
        table = table.replace(rows=table.rows[:, order], column_names=fitted.input_columns)
    if table.allow_missing and np.isnan(table.rows).any():
        if not fitted.impute_medians:
            raise DataError("table has missing values and the transform was fitted without imputation")
        table = _impute(table, fitted.impute_medians)
    t = apply_clip(table, fitted.clip_bounds)
    t = engineer_features(t, fitted.interaction_recipes + fitted.polynomial_recipes, fitted.epsilon)
    t = _drop(t, fitted.dropped_columns)
    if fitted.standardization:
        t = _standardize(t, fitted.standardization)
    return t
