import numpy as np
import pytest
import yaml

from alzens.dataset import Table
from alzens.synthetic import make_synthetic, write_study_csv


@pytest.fixture(scope="session")
def study_table():
    """Synthetic stand-in with the study's shape: 2149 rows, 32 features, 1389/760 classes."""
    return make_synthetic(2149, 760, seed=0)


@pytest.fixture
def small_table():
    return make_synthetic(300, 110, seed=3)


def blobs(n_per_class=40, d=2, gap=6.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n_per_class, d)), rng.normal(gap, 1, (n_per_class, d))])
    y = np.repeat([0, 1], n_per_class)
    return Table([f"x{i}" for i in range(d)], X, y)


FAST_CONFIG = {
    "seed": 7,
    "models": {
        "random_forest": {"kind": "random_forest", "params": {"n_estimators": 8, "max_depth": 6}},
        "gradient_boosting": {"kind": "boosted", "params": {"n_estimators": 15, "max_depth": 3}},
        "xgboost": {
            "kind": "boosted",
            "params": {"n_estimators": 15, "histogram_bins": 32, "subsample_rows": 0.8},
        },
    },
    "ensembles": {"oof_folds": 3, "meta_params": {"n_estimators": 10, "max_depth": 2, "min_samples_leaf": 5}},
    "seed_sweep": {"model": "random_forest", "seeds": [1, 2, 3]},
    "cv": {"enabled": True, "k": 3, "models": ["gradient_boosting"]},
    "explain": {"permutation_repeats": 2, "shap_max_instances": 40},
}


@pytest.fixture
def fast_config(tmp_path):
    """Config file + synthetic CSV for a quick full pipeline run; returns the config path."""
    data = tmp_path / "data.csv"
    write_study_csv(make_synthetic(400, 140, seed=11), data)
    cfg = dict(FAST_CONFIG, data={"path": "data.csv"}, output_dir=str(tmp_path / "run"))
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
