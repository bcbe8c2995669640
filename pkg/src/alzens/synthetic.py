"""Seeded generator for a table shaped like the clinical Alzheimer's dataset.

The real data is not redistributed; this produces the same 32 feature
columns (plus ``PatientID``, ``DoctorInCharge`` and ``Diagnosis``) with
plausible ranges and a label driven by a handful of cognitive and
functional columns.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import Table

# name -> ("uniform", low, high) | ("int", low, high_inclusive) | ("binary", p)
SCHEMA = {
    "Age": ("int", 60, 90),
    "Gender": ("binary", 0.5),
    "Ethnicity": ("int", 0, 3),
    "EducationLevel": ("int", 0, 3),
    "BMI": ("uniform", 15.0, 40.0),
    "Smoking": ("binary", 0.29),
    "AlcoholConsumption": ("uniform", 0.0, 20.0),
    "PhysicalActivity": ("uniform", 0.0, 10.0),
    "DietQuality": ("uniform", 0.0, 10.0),
    "SleepQuality": ("uniform", 4.0, 10.0),
    "FamilyHistoryAlzheimers": ("binary", 0.25),
    "CardiovascularDisease": ("binary", 0.14),
    "Diabetes": ("binary", 0.15),
    "Depression": ("binary", 0.20),
    "HeadInjury": ("binary", 0.09),
    "Hypertension": ("binary", 0.15),
    "SystolicBP": ("int", 90, 179),
    "DiastolicBP": ("int", 60, 119),
    "CholesterolTotal": ("uniform", 150.0, 300.0),
    "CholesterolLDL": ("uniform", 50.0, 200.0),
    "CholesterolHDL": ("uniform", 20.0, 100.0),
    "CholesterolTriglycerides": ("uniform", 50.0, 400.0),
    "MMSE": ("uniform", 0.0, 30.0),
    "FunctionalAssessment": ("uniform", 0.0, 10.0),
    "MemoryComplaints": ("binary", 0.21),
    "BehavioralProblems": ("binary", 0.16),
    "ADL": ("uniform", 0.0, 10.0),
    "Confusion": ("binary", 0.21),
    "Disorientation": ("binary", 0.16),
    "PersonalityChanges": ("binary", 0.15),
    "DifficultyCompletingTasks": ("binary", 0.16),
    "Forgetfulness": ("binary", 0.30),
}
FEATURES = tuple(SCHEMA)
TARGET = "Diagnosis"
ID_COLUMNS = ("PatientID", "DoctorInCharge")


def make_synthetic(
    n_samples: int = 2149, n_positive: int = 760, seed: int = 0, noise: float = 0.8
) -> Table:
    """Draw ``n_samples`` rows with exactly ``n_positive`` class-1 labels."""
    rng = np.random.default_rng(seed)
    cols = []
    for kind, *args in SCHEMA.values():
        if kind == "uniform":
            cols.append(rng.uniform(args[0], args[1], n_samples))
        elif kind == "int":
            cols.append(rng.integers(args[0], args[1] + 1, n_samples).astype(float))
        else:
            cols.append((rng.random(n_samples) < args[0]).astype(float))
    X = np.column_stack(cols)
    get = {name: X[:, i] for i, name in enumerate(FEATURES)}
    risk = (
        1.6 * (get["FunctionalAssessment"] < 5)
        + 1.6 * (get["ADL"] < 5)
        + 1.2 * (get["MMSE"] < 24)
        + 1.5 * get["MemoryComplaints"]
        + 1.3 * get["BehavioralProblems"]
        + 0.01 * (get["Age"] - 75)
        + noise * rng.standard_normal(n_samples)
    )
    order = np.argsort(-risk, kind="stable")
    y = np.zeros(n_samples, dtype=np.int64)
    y[order[:n_positive]] = 1
    ids = tuple(str(4751 + i) for i in range(n_samples))
    return Table(FEATURES, X, y, ids, TARGET)


def write_study_csv(table: Table, path) -> None:
    """Write ``table`` in the raw study layout, identifier columns included."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["PatientID", *table.column_names, TARGET, "DoctorInCharge"])
        for i in range(table.n_samples):
            pid = table.row_ids[i] if table.row_ids else str(i)
            cells = [repr(float(v)) for v in table.rows[i]]
            w.writerow([pid, *cells, int(table.labels[i]), "XXXConfid"])
