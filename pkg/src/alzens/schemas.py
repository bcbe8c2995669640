"""JSON schemas for emitted reports and CSV header checks used on round-trip validation."""
import csv
import json
from pathlib import Path

import jsonschema

from .errors import DataError

_NUM_OR_NULL = {"type": ["number", "null"]}

METRICS_SCHEMA = {
    "type": "object",
    "required": ["accuracy", "precision", "recall", "f1", "auc", "confusion", "flags"],
    "properties": {
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "f1": {"type": "number", "minimum": 0, "maximum": 1},
        "auc": _NUM_OR_NULL,
        "confusion": {
            "type": "object",
            "required": ["tp", "fp", "fn", "tn"],
            "properties": {k: {"type": "integer", "minimum": 0} for k in ("tp", "fp", "fn", "tn")},
            "additionalProperties": False,
        },
        "flags": {"type": "array", "items": {"type": "string"}},
    },
}

SPLIT_SCHEMA = {
    "type": "object",
    "required": ["train", "validation", "test"],
    "properties": {k: {"type": "array", "items": {"type": "integer"}} for k in ("train", "validation", "test")},
    "additionalProperties": False,
}

RESAMPLE_SCHEMA = {
    "type": "object",
    "required": ["before", "after_smote", "links_removed", "after"],
}

SELECTION_SCHEMA = {
    "type": "object",
    "required": ["selected", "candidates"],
    "properties": {
        "candidates": {
            "type": "array",
            "items": {"type": "object", "required": ["name", "accuracy", "auc"]},
        }
    },
}

MODEL_SCHEMA = {"type": "object", "required": ["format_version"]}

JSON_SCHEMAS = {
    "metrics.json": METRICS_SCHEMA,
    "split.json": SPLIT_SCHEMA,
    "resample_report.json": RESAMPLE_SCHEMA,
    "selection_report.json": SELECTION_SCHEMA,
}

CSV_HEADERS = {
    "roc.csv": ["fpr", "tpr", "threshold"],
    "confusion.csv": ["actual", "predicted_0", "predicted_1"],
    "importance.csv": ["method", "feature", "score"],
}


def validate_file(path) -> None:
    """Re-read an emitted file and check it against its schema; raises DataError."""
    path = Path(path)
    name = path.name
    if name.endswith(".json"):
        doc = json.loads(path.read_text(encoding="utf-8"))
        schema = JSON_SCHEMAS.get(name) or (MODEL_SCHEMA if path.parent.name == "models" else None)
        if schema is not None:
            try:
                jsonschema.validate(doc, schema)
            except jsonschema.ValidationError as exc:
                raise DataError(f"{path}: {exc.message}") from None
    elif name.endswith(".csv"):
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DataError(f"{path}: empty CSV")
        expected = CSV_HEADERS.get(name)
        if expected is not None and rows[0] != expected:
            raise DataError(f"{path}: header {rows[0]} != {expected}")
        if name == "shap.csv" and "base_value" not in rows[0]:
            raise DataError(f"{path}: no base_value column")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise DataError(f"{path}: ragged rows")


def validate_tree(root) -> int:
    count = 0
    for path in sorted(Path(root).rglob("*")):
        if path.suffix in (".json", ".csv"):
            validate_file(path)
            count += 1
    return count
