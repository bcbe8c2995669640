"""Gini importance, permutation importance and exact TreeSHAP attributions."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import stream
from ._treeshap import tree_shap_batch
from .dataset import Table
from .errors import EmptyAttribution, MissingCover, ModelError, UnfittedModel
from .learners.models import BoostedModel, ConstantModel, ForestModel, Model, TreeModel
from .learners.tree import LEAF, Tree
from .metrics import roc_auc


@dataclass(frozen=True, eq=False)
class ImportanceRanking:
    method: str
    feature_names: tuple
    scores: np.ndarray

    @property
    def ordering(self) -> list:
        """Feature names by descending score; equal scores keep column order."""
        order = np.argsort(-self.scores, kind="stable")
        return [self.feature_names[i] for i in order]

    def as_dict(self) -> dict:
        return dict(zip(self.feature_names, (float(s) for s in self.scores)))

    def rows(self) -> list[tuple]:
        order = np.argsort(-self.scores, kind="stable")
        return [(self.method, self.feature_names[i], float(self.scores[i])) for i in order]


@dataclass(frozen=True, eq=False)
class Attribution:
    """Per-instance SHAP matrix; ``base_value + values.sum(1)`` reproduces ``output``."""

    base_value: float
    values: np.ndarray
    feature_names: tuple
    output: np.ndarray
    output_space: str


def _check_covers(tree: Tree) -> None:
    if tree.cover is None or not np.all(np.isfinite(tree.cover)) or np.any(tree.cover <= 0):
        raise MissingCover("every node needs a positive recorded cover")


def _tree_expectation(tree: Tree) -> float:
    leaves = tree.left == LEAF
    return float((tree.value[leaves] * tree.cover[leaves]).sum() / tree.cover[0])


def _single_tree_shap(tree: Tree, X: np.ndarray) -> np.ndarray:
    _check_covers(tree)
    return tree_shap_batch(
        tree.left, tree.right, tree.feature, tree.threshold, tree.value, tree.cover,
        np.ascontiguousarray(X, dtype=np.float64), tree.depth,
    )


def tree_shap(model: Model, instances: Table) -> Attribution:
    """Exact Shapley values of the model output under cover-weighted conditional expectations.

    Forests and single trees are explained in probability space, boosted
    models in margin (log-odds) space.
    """
    X = model.matrix(instances)
    names = model.feature_names
    if isinstance(model, BoostedModel):
        values = np.zeros(X.shape)
        base = model.base_score
        for t in model.trees:
            values += model.learning_rate * _single_tree_shap(t, X)
            base += model.learning_rate * _tree_expectation(t)
        return Attribution(base, values, names, model.margin_matrix(X), "margin")
    if isinstance(model, (TreeModel, ForestModel)):
        trees = model.trees
        values = np.zeros(X.shape)
        for t in trees:
            values += _single_tree_shap(t, X)
        values /= len(trees)
        base = float(np.mean([_tree_expectation(t) for t in trees]))
        return Attribution(base, values, names, model.proba_matrix(X), "probability")
    if isinstance(model, ConstantModel):
        return Attribution(model.probability, np.zeros(X.shape), names, model.proba_matrix(X), "probability")
    raise ModelError(f"TreeSHAP is not defined for model kind {model.kind!r}")


def shap_global_ranking(attribution: Attribution) -> ImportanceRanking:
    if attribution.values.size == 0:
        raise EmptyAttribution("attribution has no instances")
    scores = np.abs(attribution.values).mean(axis=0)
    return ImportanceRanking("shap_mean_abs", attribution.feature_names, scores)


def gini_importance(model: Model) -> ImportanceRanking:
    """Impurity-decrease importance (gain importance for boosted trees), normalised to sum 1."""
    trees = model.trees
    if not trees:
        raise UnfittedModel(f"model kind {model.kind!r} has no trees")
    m = len(model.feature_names)
    total = np.zeros(m)
    for t in trees:
        internal = t.left != LEAF
        per_tree = np.zeros(m)
        if isinstance(model, BoostedModel):
            np.add.at(per_tree, t.feature[internal], t.gain[internal])
            total += per_tree
        else:
            np.add.at(per_tree, t.feature[internal], t.cover[internal] * t.gain[internal])
            if per_tree.sum() > 0:
                total += per_tree / per_tree.sum()
    if total.sum() > 0:
        total = total / total.sum()
    return ImportanceRanking("gini", model.feature_names, total)


def _score(metric: str, y: np.ndarray, proba: np.ndarray) -> float:
    if metric == "accuracy":
        return float(np.mean((proba >= 0.5).astype(np.int64) == y))
    if metric == "auc":
        return roc_auc(y, proba)[0]
    raise ValueError(f"unknown metric {metric!r}")


def permutation_importance(model, table: Table, metric: str = "accuracy", n_repeats: int = 5, seed: int = 0):
    """Mean drop in ``metric`` when one column is shuffled (the model is never refitted)."""
    y = table.require_labels()
    baseline = _score(metric, y, model.predict_proba(table))
    scores = np.zeros(table.n_features)
    for j in range(table.n_features):
        drops = []
        for r in range(n_repeats):
            rows = np.array(table.rows)
            rows[:, j] = rows[stream(seed, j, r).permutation(table.n_samples), j]
            drops.append(baseline - _score(metric, y, model.predict_proba(table.replace(rows=rows))))
        scores[j] = np.mean(drops)
    return ImportanceRanking("permutation", table.column_names, scores)


def write_importance_csv(rankings, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "feature", "score"])
        for ranking in rankings:
            for method, feature, score in ranking.rows():
                w.writerow([method, feature, repr(score)])


def write_shap_csv(attribution: Attribution, path, row_ids=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = list(attribution.feature_names) + ["base_value", f"model_output_{attribution.output_space}"]
        w.writerow((["row_id"] if row_ids is not None else []) + head)
        for i in range(attribution.values.shape[0]):
            rec = [repr(float(v)) for v in attribution.values[i]]
            rec += [repr(float(attribution.base_value)), repr(float(attribution.output[i]))]
            w.writerow(([row_ids[i]] if row_ids is not None else []) + rec)
