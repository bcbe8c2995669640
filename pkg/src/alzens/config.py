"""Pipeline configuration: one YAML/JSON file describing a whole run.

Unknown keys are rejected so typos fail loudly. ``alzens config-schema``
prints the JSON schema generated from these models.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .ensemble import STRATEGIES
from .errors import ConfigError
from .learners.models import Hyperparams
from .resample import ResamplePlan
from .transform import DEFAULT_INTERACTIONS, DEFAULT_POLYNOMIALS, Recipe, TransformOptions

OUTPUT_DIR_ENV = "ALZENS_OUTPUT_DIR"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, validate_default=True)


class DataConfig(_Strict):
    path: str
    target: str = "Diagnosis"
    drop: list[str] = ["PatientID", "DoctorInCharge"]
    id_column: Optional[str] = None
    allow_missing: bool = False


class SplitConfig(_Strict):
    test_fraction: float = Field(0.15, gt=0, lt=1)
    validation_fraction: float = Field(0.15, gt=0, lt=1)

    @model_validator(mode="after")
    def _sum(self):
        if self.test_fraction + self.validation_fraction >= 1:
            raise ValueError("test_fraction + validation_fraction must be < 1")
        return self


class RecipeConfig(_Strict):
    name: str
    op: Literal["product", "ratio", "power"]
    left: str
    right: Optional[str] = None
    power: int = 2

    def build(self) -> Recipe:
        return Recipe(self.name, self.op, self.left, self.right, self.power)


def _recipe_dicts(recipes):
    return [{"name": r.name, "op": r.op, "left": r.left, "right": r.right, "power": r.power} for r in recipes]


class TransformConfig(_Strict):
    impute: bool = False
    clip: bool = True
    clip_skip_binary: bool = True
    interactions: list[RecipeConfig] = Field(default_factory=lambda: _recipe_dicts(DEFAULT_INTERACTIONS))
    polynomials: list[RecipeConfig] = Field(default_factory=lambda: _recipe_dicts(DEFAULT_POLYNOMIALS))
    prune_threshold: Optional[float] = Field(0.95, gt=0, le=1)
    standardize: bool = True
    epsilon: float = Field(1e-6, gt=0)

    def options(self) -> TransformOptions:
        return TransformOptions(
            impute=self.impute,
            clip=self.clip,
            clip_skip_binary=self.clip_skip_binary,
            interactions=tuple(r.build() for r in self.interactions),
            polynomials=tuple(r.build() for r in self.polynomials),
            prune_threshold=self.prune_threshold,
            standardize=self.standardize,
            epsilon=self.epsilon,
        )


class ResampleConfig(_Strict):
    enabled: bool = True
    k_neighbors: int = Field(5, ge=1)
    target_ratio: float = Field(1.0, gt=0, le=1)
    link_removal: Literal["majority_only", "both"] = "majority_only"

    def plan(self, seed: int) -> ResamplePlan:
        return ResamplePlan(self.k_neighbors, self.target_ratio, self.link_removal, seed)


class ParamsConfig(_Strict):
    n_estimators: int = Field(100, ge=0)
    max_depth: Optional[int] = Field(None, ge=1)
    min_samples_leaf: Optional[int] = Field(None, ge=1)
    max_features: Union[int, float, Literal["sqrt", "all"], None] = None
    learning_rate: float = Field(0.1, gt=0, le=1)
    subsample_rows: float = Field(1.0, gt=0, le=1)
    lambda_l2: float = Field(1.0, ge=0)
    gamma: float = Field(0.0, ge=0)
    histogram_bins: int = Field(0, ge=0)
    bootstrap: bool = True

    def hyperparams(self, seed: int) -> Hyperparams:
        return Hyperparams(seed=seed, **self.model_dump())


class ModelConfig(_Strict):
    kind: Literal["tree", "random_forest", "extra_trees", "boosted", "majority"]
    enabled: bool = True
    params: ParamsConfig = ParamsConfig()


def _default_models():
    return {
        "random_forest": {"kind": "random_forest", "params": {"n_estimators": 100}},
        "extra_trees": {"kind": "extra_trees", "params": {"n_estimators": 100}},
        "gradient_boosting": {
            "kind": "boosted",
            "params": {"n_estimators": 150, "learning_rate": 0.05, "max_depth": 3},
        },
        "xgboost": {
            "kind": "boosted",
            "params": {"n_estimators": 200, "learning_rate": 0.05, "max_depth": 4,
                       "histogram_bins": 256, "subsample_rows": 0.8, "lambda_l2": 1.0},
        },
        "lightgbm": {
            "kind": "boosted",
            "params": {"n_estimators": 200, "learning_rate": 0.05, "max_depth": 6,
                       "histogram_bins": 64, "min_samples_leaf": 20, "max_features": 0.8},
        },
    }


class EnsembleConfig(_Strict):
    strategies: list[Literal["hard_vote", "soft_vote", "weighted_average", "stacking"]] = list(STRATEGIES)
    members: Optional[list[str]] = None
    oof_folds: int = Field(5, ge=2)
    meta_params: ParamsConfig = ParamsConfig(
        n_estimators=50, max_depth=2, min_samples_leaf=5, learning_rate=0.1
    )


class SweepConfig(_Strict):
    model: str = "random_forest"
    seeds: list[int] = Field(default_factory=lambda: list(range(1, 11)), min_length=1)


class CVConfig(_Strict):
    enabled: bool = True
    k: int = Field(10, ge=2)
    models: list[str] = ["random_forest"]


class ExplainConfig(_Strict):
    permutation_metric: Literal["accuracy", "auc"] = "accuracy"
    permutation_repeats: int = Field(5, ge=1)
    shap_max_instances: Optional[int] = Field(None, ge=1)


class PipelineConfig(_Strict):
    data: DataConfig
    seed: int = 42
    split: SplitConfig = SplitConfig()
    transform: TransformConfig = TransformConfig()
    resample: ResampleConfig = ResampleConfig()
    models: dict[str, ModelConfig] = Field(default_factory=_default_models)
    ensembles: EnsembleConfig = EnsembleConfig()
    seed_sweep: Optional[SweepConfig] = SweepConfig()
    cv: CVConfig = CVConfig()
    explain: ExplainConfig = ExplainConfig()
    output_dir: str = "runs/default"

    @model_validator(mode="after")
    def _references(self):
        enabled = self.enabled_models
        if not enabled:
            raise ValueError("no models enabled")
        for name in self.ensembles.members or []:
            if name not in enabled:
                raise ValueError(f"ensemble member {name!r} is not an enabled model")
        if self.seed_sweep is not None and self.seed_sweep.model not in enabled:
            raise ValueError(f"seed_sweep model {self.seed_sweep.model!r} is not an enabled model")
        for name in self.cv.models if self.cv.enabled else []:
            if name not in enabled:
                raise ValueError(f"cv model {name!r} is not an enabled model")
        return self

    @property
    def enabled_models(self) -> list[str]:
        return [n for n, m in self.models.items() if m.enabled]

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)



def parse_config(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    try:
        cfg = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{exc}") from None
    if base_dir is not None and not Path(cfg.data.path).is_absolute():
        data_cfg = cfg.data.model_copy(update={"path": str(base_dir / cfg.data.path)})
        cfg = cfg.model_copy(update={"data": data_cfg})
    return cfg


def load_config(path) -> PipelineConfig:
    """Read a YAML or JSON config; relative data paths resolve against the config's directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, path.parent)


def config_schema() -> dict:
    return PipelineConfig.model_json_schema()
