"""Confusion counts, accuracy/precision/recall/F1/ROC-AUC and stratified cross-validation."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ._rng import derive_seed
from .dataset import Table, stratified_kfold
from .errors import EmptyInput, LengthMismatch, SingleClassLabels

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float = float("nan")
    flags: frozenset = frozenset()
    roc_points: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = {name: _json_float(getattr(self, name)) for name in METRIC_NAMES}
        c = self.counts
        d["confusion"] = {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
        d["flags"] = sorted(self.flags)
        return d


def _json_float(v: float):
    return None if v != v else float(v)


def _binary(a, name) -> np.ndarray:
    a = np.asarray(a)
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(np.int64)


def confusion(labels, predictions) -> ConfusionCounts:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.size} labels vs {p.size} predictions")
    if y.size == 0:
        raise EmptyInput("no samples to score")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
        tn=int(np.sum((y == 0) & (p == 0))),
    )


def scalar_metrics(counts: ConfusionCounts) -> MetricsReport:
    """Accuracy, precision, recall and F1 from counts; undefined ratios become 0 plus a flag."""
    if counts.total <= 0:
        raise EmptyInput("confusion counts are all zero")
    flags = set()
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    accuracy = (tp + tn) / counts.total
    if tp + fp == 0:
        precision = 0.0
        flags.add("precision_undefined")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.add("recall_undefined")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        flags.add("f1_undefined")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(counts, accuracy, precision, recall, f1, flags=frozenset(flags))


def roc_points(labels, scores) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) for a descending threshold sweep; tied scores share one point."""
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.append(s_sorted[1:] != s_sorted[:-1], True)
    tps = np.cumsum(y_sorted)[last_of_group]
    fps = np.cumsum(1 - y_sorted)[last_of_group]
    points = [(0.0, 0.0, float("inf"))]
    for tp_, fp_, thr in zip(tps, fps, s_sorted[last_of_group]):
        points.append((fp_ / n_neg, tp_ / n_pos, float(thr)))
    return points


def trapezoid_area(points) -> float:
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(labels, scores) -> tuple[float, list]:
    """Mann-Whitney AUC (tied pairs count one half) and the ROC points."""
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch(f"{y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("AUC needs both classes")
    ranks = rankdata(s)
    auc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return float(auc), roc_points(y, s)


def evaluate(labels, scores, threshold: float = 0.5) -> MetricsReport:
    """Full report for probability ``scores``: label = 1 iff score >= threshold."""
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    report = scalar_metrics(confusion(y, (s >= threshold).astype(np.int64)))
    try:
        auc, points = roc_auc(y, s)
    except SingleClassLabels:
        return replace(report, flags=report.flags | {"auc_undefined"})
    return replace(report, auc=auc, roc_points=tuple(points))


def write_metrics_json(report: MetricsReport, path, extra: dict | None = None) -> None:
    d = report.to_dict()
    if extra:
        d.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(d, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_roc_csv(report: MetricsReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, thr in report.roc_points:
            w.writerow([repr(float(fpr)), repr(float(tpr)), repr(float(thr))])


def write_confusion_csv(counts: ConfusionCounts, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["actual", "predicted_0", "predicted_1"])
        w.writerow([0, counts.tn, counts.fp])
        w.writerow([1, counts.fn, counts.tp])


@dataclass
class CVResult:
    folds: list
    summary: dict

    def to_dict(self) -> dict:
        return {
            "k": len(self.folds),
            "folds": [f.to_dict() for f in self.folds],
            "summary": self.summary,
        }


def summarize(reports) -> dict:
    """Mean and sample standard deviation of every metric across reports."""
    out = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[name] = {"mean": _json_float(float(vals.mean())), "std": _json_float(std)}
    return out


def cross_validate(table: Table, spec, k: int = 10, seed: int = 0, transform_options=None, resample_plan=None):
    """Stratified k-fold scoring of ``spec`` (anything with ``.fit(table) -> model``).

    Transforms and resampling, when given, are fitted on each training fold
    only and replayed on its held-out fold.
    """
    from .resample import smote_tomek
    from .transform import fit_transform

    reports = []
    for f, (tr, ho) in enumerate(stratified_kfold(table, k, seed)):
        train, held = table.take(tr), table.take(ho)
        if transform_options is not None:
            fitted, train = fit_transform(train, transform_options)
            held = fitted.apply(held)
        if resample_plan is not None:
            plan = replace(resample_plan, seed=derive_seed(resample_plan.seed, "cv", f))
            train, _ = smote_tomek(train, plan)
        model = spec.fit(train)
        reports.append(evaluate(held.labels, model.predict_proba(held)))
    return CVResult(reports, summarize(reports))
