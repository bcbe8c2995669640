"""Explainable tree-ensemble toolkit for binary clinical tabular classification."""
from .dataset import SplitIndices, Table, class_counts, load_csv, stratified_kfold, stratified_two_stage_split
from .errors import AlzensError

__version__ = "0.1.0"

__all__ = [
    "AlzensError", "SplitIndices", "Table", "class_counts", "load_csv", "stratified_kfold",
    "stratified_two_stage_split",
]
