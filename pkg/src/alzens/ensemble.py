"""Voting, weighted averaging, stacking and the per-seed model sweep."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ._rng import derive_seed
from .dataset import Table, stratified_kfold
from .errors import DataError, NoMembers
from .learners.models import FORMAT_VERSION, Hyperparams, Model, ModelSpec, fit_boosted, model_from_dict

STRATEGIES = ("hard_vote", "soft_vote", "weighted_average", "stacking")


def _matrix(values) -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2 or m.shape[1] == 0:
        raise NoMembers("ensemble needs at least one member")
    return m


def hard_vote(member_labels) -> np.ndarray:
    """Majority label per row of an ``(n_rows, n_members)`` 0/1 matrix; an exact tie gives 1."""
    m = _matrix(member_labels)
    return (m.mean(axis=1) >= 0.5).astype(np.int64)


def soft_vote(member_probs) -> np.ndarray:
    m = _matrix(member_probs)
    if m.min() < 0 or m.max() > 1:
        raise DataError("member probabilities must lie in [0, 1]")
    return m.mean(axis=1)


def accuracy_weights(validation_accuracies) -> np.ndarray:
    acc = np.asarray(validation_accuracies, dtype=np.float64)
    if acc.size == 0:
        raise NoMembers("ensemble needs at least one member")
    if np.any(acc <= 0):
        raise DataError("validation accuracies must be positive")
    return acc / acc.sum()


def weighted_average(member_probs, validation_accuracies) -> np.ndarray:
    """Row-wise mean weighted by accuracies normalised to sum 1."""
    m = _matrix(member_probs)
    return m @ accuracy_weights(validation_accuracies)


class EnsembleModel:
    """Combination of fitted members; ``predict_proba`` returns a class-1 score in [0, 1].

    For hard voting the score is the fraction of members voting 1, so the
    0.5 label threshold reproduces the majority rule with ties to 1.
    """

    def __init__(self, members, strategy, weights=None, meta_learner=None, oof_folds=0):
        if not members:
            raise NoMembers("ensemble needs at least one member")
        if strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {strategy!r}")
        if (weights is not None) != (strategy == "weighted_average"):
            raise DataError("weights are required for, and only for, weighted_average")
        if (meta_learner is not None) != (strategy == "stacking"):
            raise DataError("a meta learner is required for, and only for, stacking")
        self.members = list(members)  # (name, model) pairs
        self.strategy = strategy
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)
        self.meta_learner = meta_learner
        self.oof_folds = oof_folds
        self.oof_meta_features = None
        self.oof_fold_of = None

    kind = property(lambda self: self.strategy)

    @property
    def member_names(self) -> list:
        return [n for n, _ in self.members]

    @property
    def feature_names(self):
        return self.members[0][1].feature_names

    def member_probas(self, table: Table) -> np.ndarray:
        return np.column_stack([m.predict_proba(table) for _, m in self.members])

    def predict_proba(self, table: Table) -> np.ndarray:
        probs = self.member_probas(table)
        if self.strategy == "hard_vote":
            return (probs >= 0.5).mean(axis=1)
        if self.strategy == "soft_vote":
            return soft_vote(probs)
        if self.strategy == "weighted_average":
            return probs @ self.weights
        meta = Table(self.member_names, probs)
        return self.meta_learner.predict_proba(meta)

    def predict(self, table: Table) -> np.ndarray:
        return (self.predict_proba(table) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "strategy": self.strategy,
            "members": [{"name": n, "model": m.to_dict()} for n, m in self.members],
            "weights": None if self.weights is None else [float(w) for w in self.weights],
            "meta_learner": None if self.meta_learner is None else self.meta_learner.to_dict(),
            "oof_folds": self.oof_folds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        members = [(m["name"], model_from_dict(m["model"])) for m in d["members"]]
        meta = None if d["meta_learner"] is None else model_from_dict(d["meta_learner"])
        return cls(members, d["strategy"], d["weights"], meta, d["oof_folds"])


DEFAULT_META = Hyperparams(n_estimators=50, max_depth=2, min_samples_leaf=5, learning_rate=0.1)


def out_of_fold_probas(train: Table, specs, oof_folds: int = 5, seed: int = 0):
    """``(n_train, n_members)`` out-of-fold probabilities and the fold index of every row."""
    folds = stratified_kfold(train, oof_folds, seed)
    meta = np.zeros((train.n_samples, len(specs)))
    fold_of = np.empty(train.n_samples, dtype=np.int64)
    for f, (tr, ho) in enumerate(folds):
        fold_of[ho] = f
        fold_train, fold_held = train.take(tr), train.take(ho)
        for j, (_, spec) in enumerate(specs):
            meta[ho, j] = spec.fit(fold_train).predict_proba(fold_held)
    return meta, fold_of


def fit_stacking(
    train: Table, base_specs, meta_params: Hyperparams = DEFAULT_META, oof_folds: int = 5, seed: int = 0,
    fitted_members=None,
) -> EnsembleModel:
    """Boosted meta-learner on out-of-fold member probabilities; members are refit on all of ``train``.

    ``base_specs`` is a list of ``(name, ModelSpec)``. Already-fitted full-train
    members can be passed as ``fitted_members`` to skip the refit.
    """
    if oof_folds < 2:
        raise DataError("stacking needs oof_folds >= 2")
    meta_x, fold_of = out_of_fold_probas(train, base_specs, oof_folds, seed)
    names = [n for n, _ in base_specs]
    meta_table = Table(names, meta_x, train.labels)
    meta = fit_boosted(meta_table, replace(meta_params, seed=derive_seed(seed, "meta")))
    members = fitted_members or [(n, spec.fit(train)) for n, spec in base_specs]
    model = EnsembleModel(members, "stacking", meta_learner=meta, oof_folds=oof_folds)
    model.oof_meta_features = meta_x
    model.oof_fold_of = fold_of
    return model


@dataclass
class SweepResult:
    best_seed: int
    accuracies: dict
    best_model: Model

    def to_dict(self) -> dict:
        return {
            "best_seed": self.best_seed,
            "best_accuracy": self.accuracies[self.best_seed],
            "accuracies": {str(s): a for s, a in self.accuracies.items()},
        }


def seed_sweep(train: Table, validation: Table, spec: ModelSpec, seeds) -> SweepResult:
    """Fit ``spec`` once per seed and keep the best validation accuracy (ties to the lowest seed)."""
    seeds = list(seeds)
    if not seeds:
        raise DataError("seed sweep needs at least one seed")
    y = validation.require_labels()
    accuracies, models = {}, {}
    for s in seeds:
        model = ModelSpec(spec.kind, replace(spec.params, seed=int(s))).fit(train)
        accuracies[int(s)] = float(np.mean(model.predict(validation) == y))
        models[int(s)] = model
    top = max(accuracies.values())
    best = min(s for s, a in accuracies.items() if a == top)
    return SweepResult(best, accuracies, models[best])
