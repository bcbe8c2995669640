"""Fitted model types, their fitting functions and the JSON model format."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit

from .._rng import stream
from ..dataset import Table
from ..errors import ConfigError, DataError, SchemaMismatch, SingleClass, StageInputMissing
from .splits import BinnedMatrix
from .tree import Tree, TreeGrower

FORMAT_VERSION = 1

KIND_DEFAULTS = {
    "tree": {"max_depth": 12, "min_samples_leaf": 1, "max_features": "all"},
    "random_forest": {"max_depth": 12, "min_samples_leaf": 1, "max_features": "sqrt"},
    "extra_trees": {"max_depth": 12, "min_samples_leaf": 1, "max_features": "sqrt"},
    "boosted": {"max_depth": 4, "min_samples_leaf": 20, "max_features": "all"},
    "majority": {},
}


@dataclass(frozen=True)
class Hyperparams:
    """Learner settings. ``None`` fields take the per-kind default from ``KIND_DEFAULTS``.

    ``max_features`` accepts an int, ``"sqrt"``, ``"all"`` or a fraction in (0, 1).
    ``histogram_bins=0`` means exact split search.
    """

    n_estimators: int = 100
    max_depth: int | None = None
    min_samples_leaf: int | None = None
    max_features: int | float | str | None = None
    learning_rate: float = 0.1
    subsample_rows: float = 1.0
    lambda_l2: float = 1.0
    gamma: float = 0.0
    histogram_bins: int = 0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ConfigError("n_estimators must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if not 0.0 < self.subsample_rows <= 1.0:
            raise ConfigError("subsample_rows must be in (0, 1]")
        if self.lambda_l2 < 0 or self.gamma < 0 or self.histogram_bins < 0:
            raise ConfigError("lambda_l2, gamma and histogram_bins must be non-negative")
        for name in ("max_depth", "min_samples_leaf"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1")

    def resolved(self, kind: str) -> "Hyperparams":
        defaults = KIND_DEFAULTS[kind]
        return replace(self, **{k: v for k, v in defaults.items() if getattr(self, k) is None})

    def n_candidate_features(self, n_features: int) -> int:
        mf = self.max_features
        if mf is None or mf == "all":
            return n_features
        if mf == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if isinstance(mf, float) and mf < 1.0:
            return max(1, int(mf * n_features))
        return max(1, min(int(mf), n_features))

    def to_dict(self) -> dict:
        return asdict(self)


class Model:
    """Common prediction surface: class-1 probability, hard label, schema checks."""

    kind = "model"

    def __init__(self, feature_names, params: Hyperparams):
        self.feature_names = tuple(feature_names)
        self.params = params

    def matrix(self, table: Table) -> np.ndarray:
        if table.column_names == self.feature_names:
            return table.rows
        if set(table.column_names) != set(self.feature_names) or table.n_features != len(self.feature_names):
            raise SchemaMismatch(
                f"model expects {len(self.feature_names)} columns {list(self.feature_names)[:5]}..., "
                f"table has {table.n_features}"
            )
        return table.rows[:, [table.column_names.index(c) for c in self.feature_names]]

    def predict_proba(self, table: Table) -> np.ndarray:
        return self.proba_matrix(self.matrix(table))

    def predict(self, table: Table) -> np.ndarray:
        return (self.predict_proba(table) >= 0.5).astype(np.int64)

    def proba_matrix(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def trees(self) -> list:
        return []

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "params": self.params.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class TreeModel(Model):
    kind = "tree"

    def __init__(self, tree: Tree, feature_names, params):
        super().__init__(feature_names, params)
        self.tree = tree

    @property
    def trees(self):
        return [self.tree]

    def proba_matrix(self, X):
        return self.tree.predict(X)


class ForestModel(Model):
    """Average of per-tree class-1 leaf fractions; ``kind`` is random_forest or extra_trees."""

    def __init__(self, trees, feature_names, params, kind: str):
        super().__init__(feature_names, params)
        self._trees = list(trees)
        self.kind = kind

    @property
    def trees(self):
        return self._trees

    @property
    def bootstrap(self) -> bool:
        return self.kind == "random_forest" and self.params.bootstrap

    def proba_matrix(self, X):
        total = np.zeros(X.shape[0])
        for t in self._trees:
            total += t.predict(X)
        return total / len(self._trees)


class BoostedModel(Model):
    """``margin = base_score + learning_rate * sum(tree(x))``; probability is its logistic."""

    kind = "boosted"

    def __init__(self, trees, feature_names, params, base_score: float):
        super().__init__(feature_names, params)
        self._trees = list(trees)
        self.base_score = float(base_score)

    @property
    def trees(self):
        return self._trees

    @property
    def learning_rate(self) -> float:
        return self.params.learning_rate

    @property
    def n_iterations(self) -> int:
        return len(self._trees)

    def margin_matrix(self, X):
        m = np.full(X.shape[0], self.base_score)
        for t in self._trees:
            m += self.learning_rate * t.predict(X)
        return m

    def margin(self, table: Table) -> np.ndarray:
        return self.margin_matrix(self.matrix(table))

    def staged_margin(self, table: Table):
        """Yield the margin after 0, 1, ..., n_iterations trees."""
        X = self.matrix(table)
        m = np.full(X.shape[0], self.base_score)
        yield m.copy()
        for t in self._trees:
            m += self.learning_rate * t.predict(X)
            yield m.copy()

    def proba_matrix(self, X):
        return expit(self.margin_matrix(X))

    def to_dict(self):
        d = super().to_dict()
        d["base_score"] = self.base_score
        return d


class ConstantModel(Model):
    """Predicts the training prevalence for every row (label = majority class)."""

    kind = "majority"

    def __init__(self, probability: float, feature_names, params):
        super().__init__(feature_names, params)
        self.probability = float(probability)

    def proba_matrix(self, X):
        return np.full(X.shape[0], self.probability)

    def to_dict(self):
        d = super().to_dict()
        d["probability"] = self.probability
        return d


def _labels(train: Table) -> np.ndarray:
    y = train.require_labels()
    if train.n_samples < 2 or y.min() == y.max():
        raise SingleClass("training data must contain both classes")
    return y


def _gini_stats(y, weights):
    w = np.asarray(weights, dtype=np.float64)
    return (w, w * y)


def fit_tree(train: Table, params: Hyperparams = Hyperparams()) -> TreeModel:
    y = _labels(train)
    p = params.resolved("tree")
    binned = BinnedMatrix(train.rows, p.histogram_bins)
    grower = TreeGrower(
        "gini", p.max_depth, p.min_samples_leaf, p.n_candidate_features(train.n_features),
        rng=stream(p.seed, 0),
    )
    tree = grower.grow(binned, np.arange(train.n_samples), _gini_stats(y, np.ones(train.n_samples)))
    return TreeModel(tree, train.column_names, p)


def _fit_forest_tree(binned, y, p, kind, index, n_candidates):
    rng = stream(p.seed, index)
    n = y.size
    if kind == "random_forest" and p.bootstrap:
        weights = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
    else:
        weights = np.ones(n)
    rows = np.flatnonzero(weights > 0)
    grower = TreeGrower(
        "gini", p.max_depth, p.min_samples_leaf, n_candidates,
        splitter="random" if kind == "extra_trees" else "best", rng=rng,
    )
    return grower.grow(binned, rows, _gini_stats(y, weights))


def _fit_forest(train, params, kind, n_jobs):
    y = _labels(train)
    p = params.resolved(kind)
    if p.n_estimators < 1:
        raise ConfigError("a forest needs n_estimators >= 1")
    binned = BinnedMatrix(train.rows, p.histogram_bins)
    k = p.n_candidate_features(train.n_features)
    if n_jobs == 1:
        trees = [_fit_forest_tree(binned, y, p, kind, i, k) for i in range(p.n_estimators)]
    else:
        trees = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_fit_forest_tree)(binned, y, p, kind, i, k) for i in range(p.n_estimators)
        )
    return ForestModel(trees, train.column_names, p, kind)


def fit_random_forest(train: Table, params: Hyperparams = Hyperparams(), n_jobs: int = 1) -> ForestModel:
    """Bootstrap rows per tree, sample ``max_features`` columns per split."""
    return _fit_forest(train, params, "random_forest", n_jobs)


def fit_extra_trees(train: Table, params: Hyperparams = Hyperparams(), n_jobs: int = 1) -> ForestModel:
    """No bootstrap; one uniform random threshold per candidate column per split."""
    return _fit_forest(train, params, "extra_trees", n_jobs)


def fit_boosted(train: Table, params: Hyperparams = Hyperparams()) -> BoostedModel:
    """Second-order gradient boosting on the logistic loss."""
    y = _labels(train).astype(np.float64)
    p = params.resolved("boosted")
    n = y.size
    n_pos = y.sum()
    base = math.log(n_pos / (n - n_pos))
    binned = BinnedMatrix(train.rows, p.histogram_bins)
    k = p.n_candidate_features(train.n_features)
    margin = np.full(n, base)
    ones = np.ones(n)
    n_sub = max(2, int(round(p.subsample_rows * n)))
    trees = []
    for it in range(p.n_estimators):
        rng = stream(p.seed, it)
        prob = expit(margin)
        g = prob - y
        h = prob * (1.0 - prob)
        if p.subsample_rows < 1.0:
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
        else:
            rows = np.arange(n)
        grower = TreeGrower(
            "second_order", p.max_depth, p.min_samples_leaf, k, p.lambda_l2, p.gamma, rng=rng
        )
        tree = grower.grow(binned, rows, (ones, g, h))
        trees.append(tree)
        margin += p.learning_rate * tree.predict(train.rows)
    return BoostedModel(trees, train.column_names, p, base)


def fit_majority(train: Table, params: Hyperparams = Hyperparams()) -> ConstantModel:
    y = train.require_labels()
    return ConstantModel(float(y.mean()), train.column_names, params)


FITTERS = {
    "tree": fit_tree,
    "random_forest": fit_random_forest,
    "extra_trees": fit_extra_trees,
    "boosted": fit_boosted,
    "majority": fit_majority,
}


def fit_model(kind: str, train: Table, params: Hyperparams = Hyperparams()) -> Model:
    try:
        fitter = FITTERS[kind]
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(FITTERS)}") from None
    return fitter(train, params)


def predict_proba(model: Model, table: Table) -> np.ndarray:
    return model.predict_proba(table)


def model_from_dict(d: dict) -> Model:
    if d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {d.get('format_version')!r}")
    kind = d["kind"]
    params = Hyperparams(**d["params"])
    trees = [Tree.from_dict(t) for t in d["trees"]]
    names = d["feature_names"]
    if kind == "tree":
        return TreeModel(trees[0], names, params)
    if kind in ("random_forest", "extra_trees"):
        return ForestModel(trees, names, params, kind)
    if kind == "boosted":
        return BoostedModel(trees, names, params, d["base_score"])
    if kind == "majority":
        return ConstantModel(d["probability"], names, params)
    raise DataError(f"unknown model kind {kind!r}")


def save_model(model: Model, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.to_json(), encoding="utf-8")


def load_model(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise StageInputMissing(path)
    d = json.loads(path.read_text(encoding="utf-8"))
    if "strategy" in d:
        from ..ensemble import EnsembleModel

        return EnsembleModel.from_dict(d)
    return model_from_dict(d)


@dataclass(frozen=True)
class ModelSpec:
    """A learner kind plus its hyperparameters; ``fit`` trains it on a table."""

    kind: str
    params: Hyperparams = Hyperparams()

    def fit(self, train: Table) -> Model:
        return fit_model(self.kind, train, self.params)
