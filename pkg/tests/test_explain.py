import csv

import numpy as np
import pytest

from alzens.dataset import Table
from alzens.errors import EmptyAttribution, MissingCover, UnfittedModel
from alzens.explain import (
    gini_importance,
    permutation_importance,
    shap_global_ranking,
    tree_shap,
    write_importance_csv,
    write_shap_csv,
)
from alzens.learners import Hyperparams, Tree, TreeModel, fit_boosted, fit_majority, fit_random_forest, fit_tree

from oracles import brute_force_shapley, random_tree_dict


def signal_table(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=n) > 0).astype(int)
    return Table(["signal", "n1", "n2", "n3"], X, y)


def stump():
    return Tree.from_dict({"nodes": [
        {"feature": 0, "threshold": 0.0, "left": 1, "right": 2, "value": 0.5, "cover": 4.0, "gain": 0.5},
        {"value": 0.0, "cover": 3.0},
        {"value": 1.0, "cover": 1.0},
    ]})


def test_stump_shap_by_hand():
    model = TreeModel(stump(), ["a", "b"], Hyperparams())
    att = tree_shap(model, Table(["a", "b"], [[1.0, 9.0], [-1.0, 9.0]]))
    assert att.base_value == pytest.approx(0.25)
    np.testing.assert_allclose(att.values, [[0.75, 0.0], [-0.25, 0.0]])


def test_random_trees_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(25):
        m = int(rng.integers(1, 6))
        d = random_tree_dict(rng, m, 4)
        model = TreeModel(Tree.from_dict(d), [f"f{i}" for i in range(m)], Hyperparams())
        X = np.round(rng.normal(size=(3, m)), 3)
        att = tree_shap(model, Table(model.feature_names, X))
        for i in range(3):
            np.testing.assert_allclose(att.values[i], brute_force_shapley(d["nodes"], X[i], m), atol=1e-8)


@pytest.mark.parametrize("kind", ["tree", "forest", "boosted"])
def test_additivity(kind):
    t = signal_table()
    if kind == "tree":
        model = fit_tree(t, Hyperparams(max_depth=5))
    elif kind == "forest":
        model = fit_random_forest(t, Hyperparams(n_estimators=10, max_depth=5))
    else:
        model = fit_boosted(t, Hyperparams(n_estimators=20))
    att = tree_shap(model, t)
    assert att.output_space == ("margin" if kind == "boosted" else "probability")
    np.testing.assert_allclose(att.base_value + att.values.sum(axis=1), att.output, atol=1e-6)


def test_unused_feature_gets_zero():
    model = TreeModel(stump(), ["a", "b"], Hyperparams())
    att = tree_shap(model, Table(["a", "b"], np.random.default_rng(0).normal(size=(10, 2))))
    assert np.all(att.values[:, 1] == 0.0)


def test_missing_cover_rejected():
    d = stump().to_dict()
    d["nodes"][1]["cover"] = 0.0
    model = TreeModel(Tree.from_dict(d), ["a", "b"], Hyperparams())
    with pytest.raises(MissingCover):
        tree_shap(model, Table(["a", "b"], [[0.0, 0.0]]))


def test_rankings_find_the_signal():
    t = signal_table()
    model = fit_random_forest(t, Hyperparams(n_estimators=10, max_depth=4))
    for ranking in (
        gini_importance(model),
        shap_global_ranking(tree_shap(model, t)),
        permutation_importance(model, t, n_repeats=3, seed=1),
    ):
        assert ranking.ordering[0] == "signal"
    g = gini_importance(model)
    assert np.isclose(np.sum(g.scores), 1.0) and np.all(g.scores >= 0)


def test_gini_importance_needs_trees():
    t = signal_table(20)
    with pytest.raises(UnfittedModel):
        gini_importance(fit_majority(t))


def test_permutation_importance_is_seeded():
    t = signal_table()
    model = fit_tree(t, Hyperparams(max_depth=3))
    a = permutation_importance(model, t, "auc", 2, seed=5)
    np.testing.assert_array_equal(a.scores, permutation_importance(model, t, "auc", 2, seed=5).scores)


def test_empty_attribution():
    model = TreeModel(stump(), ["a", "b"], Hyperparams())
    att = tree_shap(model, Table(["a", "b"], np.empty((0, 2))))
    with pytest.raises(EmptyAttribution):
        shap_global_ranking(att)


def test_csv_writers(tmp_path):
    t = signal_table(40)
    model = fit_tree(t, Hyperparams(max_depth=2))
    att = tree_shap(model, t)
    write_shap_csv(att, tmp_path / "shap.csv", [f"r{i}" for i in range(40)])
    rows = list(csv.reader(open(tmp_path / "shap.csv")))
    assert rows[0] == ["row_id", "signal", "n1", "n2", "n3", "base_value", "model_output_probability"]
    assert len(rows) == 41
    write_importance_csv([gini_importance(model)], tmp_path / "imp.csv")
    rows = list(csv.reader(open(tmp_path / "imp.csv")))
    assert rows[0] == ["method", "feature", "score"] and len(rows) == 5


def split_tree(feature, lo=-1.0, hi=1.0):
    return Tree.from_dict({"nodes": [
        {"feature": feature, "threshold": 0.0, "left": 1, "right": 2, "value": 0.0, "cover": 2.0, "gain": 1.0},
        {"value": lo, "cover": 1.0},
        {"value": hi, "cover": 1.0},
    ]})


def test_single_leaf_tree_has_zero_values():
    model = TreeModel(Tree.from_dict({"nodes": [{"value": 0.3, "cover": 5.0}]}), ["a", "b"], Hyperparams())
    att = tree_shap(model, Table(["a", "b"], [[1.0, 2.0], [-3.0, 0.0]]))
    assert att.base_value == pytest.approx(0.3)
    assert np.all(att.values == 0.0)


def test_single_split_closed_form():
    model = TreeModel(split_tree(0), ["x", "z"], Hyperparams())
    att = tree_shap(model, Table(["x", "z"], [[-2.0, 5.0]]))
    assert att.base_value == 0.0
    np.testing.assert_allclose(att.values, [[-1.0, 0.0]], atol=1e-12)


def test_gini_importance_single_feature_and_forest_averaging():
    names = [f"f{i}" for i in range(5)]
    tree = TreeModel(split_tree(3, 0.0, 1.0), names, Hyperparams())
    g = gini_importance(tree)
    np.testing.assert_array_equal(g.scores, [0, 0, 0, 1.0, 0])
    from alzens.learners import ForestModel

    forest = ForestModel([split_tree(3, 0.0, 1.0)] * 2, names, Hyperparams(), "random_forest")
    np.testing.assert_array_equal(gini_importance(forest).scores, g.scores)


def test_permutation_importance_of_unused_feature_is_zero():
    t = signal_table()
    model = fit_tree(t, Hyperparams(max_depth=3))
    used = {int(f) for f, l in zip(model.tree.feature, model.tree.left) if l >= 0}
    p = permutation_importance(model, t, "accuracy", 3, seed=0)
    for j in range(4):
        if j not in used:
            assert p.scores[j] == 0.0
    assert p.scores[0] > 0


def test_symmetric_features_get_equal_attributions():
    # a AND b with uniform covers: swapping a and b leaves the tree unchanged
    d = {"nodes": [
        {"feature": 0, "threshold": 0.0, "left": 1, "right": 2, "value": 0.25, "cover": 8.0, "gain": 1.0},
        {"feature": 1, "threshold": 0.0, "left": 3, "right": 4, "value": 0.0, "cover": 4.0, "gain": 1.0},
        {"feature": 1, "threshold": 0.0, "left": 5, "right": 6, "value": 0.5, "cover": 4.0, "gain": 1.0},
        {"value": 0.0, "cover": 2.0}, {"value": 0.0, "cover": 2.0},
        {"value": 0.0, "cover": 2.0}, {"value": 1.0, "cover": 2.0},
    ]}
    model = TreeModel(Tree.from_dict(d), ["a", "b"], Hyperparams())
    v = np.array([[-1.0], [0.5], [2.0]])
    att = tree_shap(model, Table(["a", "b"], np.hstack([v, v])))
    np.testing.assert_allclose(att.values[:, 0], att.values[:, 1], atol=1e-12)
    assert att.values[2, 0] == pytest.approx(0.375)


def test_global_ranking_examples():
    from alzens.explain import Attribution

    names = ("a", "b", "c")
    zero = Attribution(0.0, np.zeros((4, 3)), names, np.zeros(4), "probability")
    assert np.all(shap_global_ranking(zero).scores == 0)
    vals = np.zeros((4, 3))
    vals[:, 2] = [0.1, -0.2, 0.3, 0.0]
    one = shap_global_ranking(Attribution(0.0, vals, names, np.zeros(4), "probability"))
    assert one.ordering[0] == "c"
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(20, 3))
    a = shap_global_ranking(Attribution(0.0, vals, names, np.zeros(20), "probability"))
    b = shap_global_ranking(Attribution(0.0, vals[rng.permutation(20)], names, np.zeros(20), "probability"))
    np.testing.assert_allclose(a.scores, b.scores, rtol=1e-12)
    assert a.ordering == b.ordering


@pytest.mark.parametrize("kind", ["tree", "forest", "boosted"])
def test_additivity_fuzz_on_unseen_instances(kind):
    t = signal_table()
    fit = {"tree": lambda: fit_tree(t, Hyperparams(max_depth=6)),
           "forest": lambda: fit_random_forest(t, Hyperparams(n_estimators=5, max_depth=5)),
           "boosted": lambda: fit_boosted(t, Hyperparams(n_estimators=10, max_depth=4))}[kind]
    model = fit()
    X = np.random.default_rng(99).normal(scale=2, size=(100, 4))
    att = tree_shap(model, Table(list(t.column_names), X))
    assert np.max(np.abs(att.base_value + att.values.sum(axis=1) - att.output)) <= 1e-6
