"""Leakage-safe end-to-end run and the individual stages the CLI exposes.

Every stage reads and writes the same files inside the output directory,
so running the stages one by one reproduces the monolithic run exactly.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .config import PipelineConfig
from .dataset import SplitIndices, Table, load_csv, load_table_csv, save_csv, stratified_two_stage_split
from .ensemble import EnsembleModel, accuracy_weights, fit_stacking, seed_sweep
from .errors import StageInputMissing
from .explain import (
    gini_importance,
    permutation_importance,
    shap_global_ranking,
    tree_shap,
    write_importance_csv,
    write_shap_csv,
)
from .learners.models import BoostedModel, ForestModel, ModelSpec, TreeModel, load_model, save_model
from .metrics import (
    CVResult,
    cross_validate,
    evaluate,
    write_confusion_csv,
    write_metrics_json,
    write_roc_csv,
)
from .resample import smote_tomek
from .schemas import validate_tree
from .transform import FittedTransform, fit_transform

log = logging.getLogger(__name__)

SPLIT_FILE = "split.json"
TRANSFORM_FILE = "transform.json"
TRAIN_FILE = "train.csv"
VALIDATION_FILE = "validation.csv"
RESAMPLED_FILE = "train_resampled.csv"


def sig6(x):
    """Round to 6 significant digits for human-facing reports."""
    if x is None or x != x:
        return None
    return float(f"{float(x):.6g}")


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path):
    if not path.exists():
        raise StageInputMissing(path)
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class RunLog:
    """Ordered record of which split each stage touched."""

    events: list = field(default_factory=list)

    def record(self, stage: str, split: str, **extra) -> None:
        self.events.append({"stage": stage, "split": split, **extra})

    @property
    def test_evaluations(self) -> int:
        return sum(1 for e in self.events if e["stage"] == "test_evaluation")


class SplitAccess:
    """Hands out split tables and logs each access, so test reads are auditable."""

    def __init__(self, table: Table, split: SplitIndices, runlog: RunLog):
        self._table = table
        self._split = split
        self._log = runlog

    def get(self, name: str, purpose: str) -> Table:
        self._log.record(purpose, name)
        return self._table.take(getattr(self._split, name))

    def union(self, names, purpose: str) -> Table:
        for n in names:
            self._log.record(purpose, n)
        idx = np.sort(np.concatenate([getattr(self._split, n) for n in names]))
        return self._table.take(idx)


def model_seed(cfg: PipelineConfig, name: str) -> int:
    return derive_seed(cfg.seed, "model", name)


def model_spec(cfg: PipelineConfig, name: str) -> ModelSpec:
    m = cfg.models[name]
    return ModelSpec(m.kind, m.params.hyperparams(model_seed(cfg, name)))


# ---- stages ---------------------------------------------------------------


def load_data(cfg: PipelineConfig) -> Table:
    d = cfg.data
    return load_csv(d.path, d.target, d.drop, d.id_column, d.allow_missing)


def stage_split(cfg: PipelineConfig, out: Path, table: Table | None = None) -> tuple[Table, SplitIndices]:
    table = table if table is not None else load_data(cfg)
    split = stratified_two_stage_split(
        table, cfg.split.test_fraction, cfg.split.validation_fraction, derive_seed(cfg.seed, "split")
    )
    write_json(out / SPLIT_FILE, split.to_dict())
    write_json(out / "split_report.json", split.report(table))
    return table, split


def load_split(out: Path) -> SplitIndices:
    return SplitIndices.from_dict(read_json(out / SPLIT_FILE))


def stage_transform(cfg, access: SplitAccess, out: Path):
    train_raw = access.get("train", "fit_transform")
    val_raw = access.get("validation", "apply_transform")
    fitted, train_t = fit_transform(train_raw, cfg.transform.options())
    val_t = fitted.apply(val_raw)
    (out / TRANSFORM_FILE).write_text(fitted.to_json() + "\n", encoding="utf-8")
    save_csv(train_t, out / TRAIN_FILE)
    save_csv(val_t, out / VALIDATION_FILE)
    return fitted, train_raw, train_t, val_t


def load_transform(out: Path) -> FittedTransform:
    path = out / TRANSFORM_FILE
    if not path.exists():
        raise StageInputMissing(path)
    return FittedTransform.from_json(path.read_text(encoding="utf-8"))


def stage_resample(cfg, train_t: Table, out: Path) -> tuple[Table, dict]:
    if cfg.resample.enabled:
        train_rs, report = smote_tomek(train_t, cfg.resample.plan(derive_seed(cfg.seed, "resample")))
    else:
        train_rs, report = train_t, {"before": {}, "after_smote": {}, "links_removed": 0, "after": {}}
    report["input_fingerprint"] = train_t.fingerprint()
    report["output_fingerprint"] = train_rs.fingerprint()
    save_csv(train_rs, out / RESAMPLED_FILE)
    write_json(out / "resample_report.json", report)
    return train_rs, report


def stage_train(cfg, train_rs: Table, names, out: Path) -> dict:
    models = {}
    for name in names:
        log.info("fitting %s", name)
        models[name] = model_spec(cfg, name).fit(train_rs)
        save_model(models[name], out / "models" / f"{name}.json")
    return models


def write_evaluation(report, folder: Path, extra: dict | None = None) -> None:
    doc = report.to_dict()
    for k in ("accuracy", "precision", "recall", "f1", "auc"):
        doc[k] = sig6(doc[k])
    if extra:
        doc.update(extra)
    write_json(folder / "metrics.json", doc)
    write_roc_csv(report, folder / "roc.csv")
    write_confusion_csv(report.counts, folder / "confusion.csv")


def evaluate_model(model, table: Table, folder: Path, extra=None):
    report = evaluate(table.labels, model.predict_proba(table))
    write_evaluation(report, folder, extra)
    return report


def explainable(model) -> bool:
    return isinstance(model, (TreeModel, ForestModel, BoostedModel))


def stage_explain(cfg, model, table: Table, out: Path, name: str = "") -> dict:
    """importance.csv (gini, permutation, shap_mean_abs) and shap.csv for ``model`` on ``table``."""
    instances = table
    if cfg.explain.shap_max_instances is not None and table.n_samples > cfg.explain.shap_max_instances:
        instances = table.take(np.arange(cfg.explain.shap_max_instances))
    attribution = tree_shap(model, instances)
    rankings = [
        gini_importance(model),
        permutation_importance(
            model, table, cfg.explain.permutation_metric, cfg.explain.permutation_repeats,
            derive_seed(cfg.seed, "permutation"),
        ),
        shap_global_ranking(attribution),
    ]
    write_importance_csv(rankings, out / "importance.csv")
    write_shap_csv(attribution, out / "shap.csv", instances.row_ids)
    summary = {
        "model": name,
        "output_space": attribution.output_space,
        "base_value": attribution.base_value,
        "n_instances": instances.n_samples,
        "top_features": {r.method: r.ordering[:10] for r in rankings},
    }
    write_json(out / "explain_report.json", summary)
    return summary


def stage_cv(cfg, table: Table, name: str, out: Path, k: int | None = None) -> CVResult:
    k = k or cfg.cv.k
    plan = cfg.resample.plan(derive_seed(cfg.seed, "cv-resample")) if cfg.resample.enabled else None
    result = cross_validate(
        table, model_spec(cfg, name), k, derive_seed(cfg.seed, "cv"), cfg.transform.options(), plan
    )
    doc = result.to_dict()
    doc["summary"] = {m: {s: sig6(v) for s, v in d.items()} for m, d in doc["summary"].items()}
    doc["model"] = name
    write_json(out / "cv" / f"{name}.json", doc)
    return result


def stage_sweep(cfg, train_rs: Table, val_t: Table, out: Path):
    sw = cfg.seed_sweep
    spec = model_spec(cfg, sw.model)
    result = seed_sweep(train_rs, val_t, spec, sw.seeds)
    name = f"{sw.model}_best_seed"
    doc = result.to_dict()
    doc["model"] = sw.model
    write_json(out / "sweep.json", doc)
    save_model(result.best_model, out / "models" / f"{name}.json")
    return name, result


# ---- full run -------------------------------------------------------------


def run_pipeline(cfg: PipelineConfig, out: Path | None = None) -> dict:
    """Load, split, transform, resample, fit, select on validation, test once, explain."""
    out = Path(out) if out is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    runlog = RunLog()
    table, split = stage_split(cfg, out)
    access = SplitAccess(table, split, runlog)

    fitted, train_raw, train_t, val_t = stage_transform(cfg, access, out)
    train_rs, rs_report = stage_resample(cfg, train_t, out)
    runlog.record("resample", "train")

    names = cfg.enabled_models
    models = stage_train(cfg, train_rs, names, out)
    runlog.record("fit_models", "train", models=list(names))

    candidates = {}
    reports = {}
    for name, model in models.items():
        reports[name] = evaluate_model(model, val_t, out / "validation" / name)
        candidates[name] = model
        runlog.record("validation_evaluation", "validation", model=name)

    members = cfg.ensembles.members or names
    member_models = [(n, models[n]) for n in members]
    for strategy in cfg.ensembles.strategies:
        if strategy == "stacking":
            ens = fit_stacking(
                train_rs, [(n, model_spec(cfg, n)) for n in members],
                cfg.ensembles.meta_params.hyperparams(derive_seed(cfg.seed, "meta")),
                cfg.ensembles.oof_folds, derive_seed(cfg.seed, "stacking"), fitted_members=member_models,
            )
            runlog.record("fit_stacking", "train")
        elif strategy == "weighted_average":
            weights = accuracy_weights([reports[n].accuracy for n in members])
            ens = EnsembleModel(member_models, strategy, weights=weights)
        else:
            ens = EnsembleModel(member_models, strategy)
        (out / "models").mkdir(exist_ok=True)
        (out / "models" / f"{strategy}.json").write_text(ens.to_json(), encoding="utf-8")
        reports[strategy] = evaluate_model(ens, val_t, out / "validation" / strategy)
        candidates[strategy] = ens
        runlog.record("validation_evaluation", "validation", model=strategy)

    if cfg.seed_sweep is not None:
        sweep_name, sweep = stage_sweep(cfg, train_rs, val_t, out)
        runlog.record("seed_sweep", "validation", model=sweep_name)
        candidates[sweep_name] = sweep.best_model
        reports[sweep_name] = evaluate_model(sweep.best_model, val_t, out / "validation" / sweep_name)
        runlog.record("validation_evaluation", "validation", model=sweep_name)

    top = max(r.accuracy for r in reports.values())
    selected = next(n for n in candidates if reports[n].accuracy == top)
    table_ii = sorted(
        (
            {"name": n, **{k: sig6(getattr(r, k)) for k in ("accuracy", "precision", "recall", "f1", "auc")}}
            for n, r in reports.items()
        ),
        key=lambda row: -row["accuracy"],
    )
    write_json(out / "selection_report.json", {"selected": selected, "split": "validation", "candidates": table_ii})
    runlog.record("selection", "validation", model=selected)

    if cfg.cv.enabled:
        dev = access.union(["train", "validation"], "cross_validation")
        for name in cfg.cv.models:
            stage_cv(cfg, dev, name, out)

    explained = selected
    if not explainable(candidates[selected]):
        tree_based = [n for n in candidates if explainable(candidates[n])]
        explained = max(tree_based, key=lambda n: (reports[n].accuracy, -list(candidates).index(n)))
    runlog.record("explain", "validation", model=explained)
    explain_summary = stage_explain(cfg, candidates[explained], val_t, out, explained)

    # the only access to test rows in the whole run
    test_raw = access.get("test", "test_evaluation")
    test_t = fitted.apply(test_raw)
    test_report = evaluate_model(candidates[selected], test_t, out / "test", {"model": selected})
    runlog.events[-1]["model"] = selected

    report = {
        "config": cfg.model_dump(mode="json"),
        "split": split.report(table),
        "selected_model": selected,
        "test_metrics": {k: sig6(v) for k, v in test_report.to_dict().items() if k in
                         ("accuracy", "precision", "recall", "f1", "auc")},
        "explained_model": explained,
        "explain": explain_summary,
        "resample": {k: rs_report[k] for k in ("before", "after_smote", "links_removed", "after")},
        "fingerprints": {
            "train": train_raw.fingerprint(),
            "transform_fit": fitted.fit_fingerprint,
            "resample_input": rs_report["input_fingerprint"],
            "model_training": train_rs.fingerprint(),
            "validation": val_t.fingerprint(),
            "test": test_t.fingerprint(),
        },
        "events": runlog.events,
        "test_evaluations": runlog.test_evaluations,
    }
    write_json(out / "run_report.json", report)
    report["validated_files"] = validate_tree(out)
    return report
