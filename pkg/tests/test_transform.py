import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alzens.dataset import Table
from alzens.errors import DataError, MissingColumn, SchemaMismatch
from alzens.transform import (
    DEFAULT_INTERACTIONS,
    DEFAULT_POLYNOMIALS,
    EPSILON,
    FittedTransform,
    Recipe,
    TransformOptions,
    apply,
    clip_outliers,
    correlation_matrix,
    engineer_features,
    fit_transform,
    prune_correlated,
)


DEFAULT_ALL = DEFAULT_INTERACTIONS + DEFAULT_POLYNOMIALS


def only(**kw):
    base = dict(clip=False, interactions=(), polynomials=(), prune_threshold=None, standardize=False)
    base.update(kw)
    return TransformOptions(**base)


def test_iqr_bounds_example():
    t = Table(["a"], np.array([[1.0], [2.0], [3.0], [4.0], [100.0]]), [0, 1, 0, 1, 0])
    assert clip_outliers(t) == {"a": (-1.0, 7.0)}
    _, out = fit_transform(t, only(clip=True))
    np.testing.assert_array_equal(out.rows[:, 0], [1, 2, 3, 4, 7])


def test_clip_leaves_binary_columns_alone():
    rows = np.array([[0.0], [0.0], [0.0], [0.0], [1.0]])
    t = Table(["flag"], rows, [0, 1, 0, 1, 0])
    fitted, out = fit_transform(t, only(clip=True))
    assert fitted.clip_bounds == {}
    np.testing.assert_array_equal(out.rows, rows)


def test_clip_bounds_come_from_training_only():
    train = Table(["a"], np.array([[1.0], [2.0], [3.0], [4.0], [100.0]]), [0, 1, 0, 1, 0])
    fitted, _ = fit_transform(train, only(clip=True))
    held = Table(["a"], np.array([[-50.0], [2.5], [500.0]]), [0, 1, 0])
    np.testing.assert_array_equal(apply(fitted, held).rows[:, 0], [-1.0, 2.5, 7.0])


def test_engineered_values():
    t = Table(["MMSE", "PhysicalActivity", "Age"], [[20.0, 0.0, 70.0], [10.0, 4.0, 3.0]], [0, 1])
    recipes = (
        Recipe("MMSE_over_PA", "ratio", "MMSE", "PhysicalActivity"),
        Recipe("MMSE_x_Age", "product", "MMSE", "Age"),
        Recipe("Age_sq", "power", "Age", power=2),
    )
    out = engineer_features(t, recipes)
    assert out.column_names[-3:] == ("MMSE_over_PA", "MMSE_x_Age", "Age_sq")
    np.testing.assert_allclose(out.column("MMSE_over_PA"), [20.0 / EPSILON, 10.0 / (4.0 + EPSILON)])
    np.testing.assert_array_equal(out.column("MMSE_x_Age"), [1400.0, 30.0])
    np.testing.assert_array_equal(out.column("Age_sq"), [4900.0, 9.0])


def test_study_recipe_examples():
    t = Table(["BMI", "Age"], [[30.0, 70.0], [20.0, 80.0]], [0, 1])
    out = engineer_features(t, (Recipe("BMI_x_Age", "product", "BMI", "Age"), Recipe("Age_sq", "power", "Age")))
    assert out.column("BMI_x_Age")[0] == 2100.0 and out.column("Age_sq")[1] == 6400.0


def test_default_recipes_on_study_schema(study_table):
    from alzens.transform import DEFAULT_INTERACTIONS, DEFAULT_POLYNOMIALS

    ops = [r.op for r in DEFAULT_INTERACTIONS + DEFAULT_POLYNOMIALS]
    assert (ops.count("product"), ops.count("ratio"), ops.count("power")) == (6, 2, 3)
    out = engineer_features(study_table, DEFAULT_INTERACTIONS + DEFAULT_POLYNOMIALS)
    assert out.n_features == 32 + 11
    assert out.column_names[:32] == study_table.column_names


def test_engineering_twice_is_shape_stable(small_table):
    from alzens.transform import DEFAULT_INTERACTIONS

    once = engineer_features(small_table, DEFAULT_INTERACTIONS)
    twice = engineer_features(once, DEFAULT_INTERACTIONS)
    assert twice.column_names == once.column_names
    np.testing.assert_array_equal(twice.rows, once.rows)


def test_all_stages_disabled_is_identity(small_table):
    fitted, out = fit_transform(small_table, TransformOptions.disabled())
    assert fitted.interaction_recipes == () and fitted.polynomial_recipes == ()
    assert out.fingerprint() == small_table.fingerprint()


def test_constant_column_bounds_collapse():
    t = Table(["c"], np.full((5, 1), 3.0), [0, 1, 0, 1, 0])
    assert clip_outliers(t) == {"c": (3.0, 3.0)}


def test_standardized_train_moments(study_table):
    _, out = fit_transform(study_table)
    means, stds = out.rows.mean(axis=0), out.rows.std(axis=0)
    assert np.all(np.abs(means) < 1e-9)
    nonconstant = stds > 0
    assert np.all(np.abs(stds[nonconstant] - 1) < 1e-9)


def test_transformed_train_respects_pruning_invariant(study_table):
    fitted, out = fit_transform(study_table)
    r = np.abs(correlation_matrix(out.rows))
    np.fill_diagonal(r, 0)
    assert r.max() <= 0.95 + 1e-12
    assert set(fitted.dropped_columns) <= set(engineer_features(study_table, DEFAULT_ALL).column_names)


def test_recipe_with_missing_source():
    t = Table(["a"], [[1.0]], [0])
    with pytest.raises(MissingColumn):
        engineer_features(t, (Recipe("ab", "product", "a", "b"),))


def test_standardize_example():
    t = Table(["a"], np.array([[3.0], [7.0]]), [0, 1])  # mean 5, population std 2
    fitted, out = fit_transform(t, only(standardize=True))
    assert fitted.standardization == {"a": (5.0, 2.0)}
    held = Table(["a"], np.array([[9.0]]), [1])
    assert apply(fitted, held).rows[0, 0] == 2.0
    np.testing.assert_array_equal(out.rows[:, 0], [-1.0, 1.0])


def test_constant_column_standardizes_to_zero():
    t = Table(["c", "a"], np.array([[4.0, 1.0], [4.0, 2.0], [4.0, 3.0]]), [0, 1, 0])
    _, out = fit_transform(t, only(standardize=True))
    np.testing.assert_array_equal(out.column("c"), [0.0, 0.0, 0.0])


def test_prune_greedy_against_kept_columns():
    x = np.linspace(0, 1, 50)
    rng = np.random.default_rng(0)
    other = rng.normal(size=50)
    rows = np.column_stack([x, 2 * x + 1, other, -x])
    t = Table(["a", "a2", "o", "neg"], rows, np.arange(50) % 2)
    assert prune_correlated(t, 0.95) == ["a2", "neg"]


def test_prune_drops_later_member_of_every_pair():
    # b tracks a, c tracks b but not a: both b and c go, a stays
    rng = np.random.default_rng(1)
    a = rng.normal(size=2000)
    b = a + 0.25 * rng.normal(size=2000)
    c = b + 0.25 * rng.normal(size=2000)
    t = Table(["a", "b", "c"], np.column_stack([a, b, c]), np.arange(2000) % 2)
    r = np.abs(correlation_matrix(t.rows))
    assert r[0, 1] > 0.95 and r[1, 2] > 0.95 and r[0, 2] <= 0.95
    assert prune_correlated(t, 0.95) == ["b", "c"]


def pearson(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def test_independent_columns_kept_and_match_pearson_oracle():
    rng = np.random.default_rng(0)
    rows = rng.uniform(size=(1000, 2))
    t = Table(["x", "y"], rows, np.arange(1000) % 2)
    assert prune_correlated(t, 0.95) == []
    assert correlation_matrix(rows)[0, 1] == pytest.approx(pearson(rows[:, 0], rows[:, 1]), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.3, 1.0))
def test_no_surviving_pair_exceeds_threshold(seed, threshold):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(60, 3))
    mix = rng.normal(size=(3, 7))
    rows = base @ mix + 0.05 * rng.normal(size=(60, 7))
    names = [f"c{i}" for i in range(7)]
    t = Table(names, rows, np.arange(60) % 2)
    dropped = set(prune_correlated(t, threshold))
    kept = [i for i, n in enumerate(names) if n not in dropped]
    for a in kept:
        for b in kept:
            if a < b:
                assert abs(pearson(rows[:, a], rows[:, b])) <= threshold + 1e-12
    for j, n in enumerate(names):
        if n in dropped:
            assert any(abs(pearson(rows[:, i], rows[:, j])) > threshold for i in range(j))


def test_constant_column_never_pruned():
    t = Table(["c", "a"], np.array([[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]), [0, 1, 0])
    assert prune_correlated(t, 0.95) == []


def test_apply_rejects_schema_change_and_reorders(small_table):
    fitted, out = fit_transform(small_table)
    names = list(small_table.column_names)
    perm = names[::-1]
    shuffled = small_table.replace(
        rows=small_table.rows[:, [names.index(c) for c in perm]], column_names=perm
    )
    np.testing.assert_array_equal(apply(fitted, shuffled).rows, out.rows)
    with pytest.raises(SchemaMismatch):
        apply(fitted, small_table.replace(rows=small_table.rows[:, 1:], column_names=names[1:]))


def test_fit_then_apply_to_train_is_identity(small_table):
    fitted, out = fit_transform(small_table)
    assert apply(fitted, small_table).fingerprint() == out.fingerprint()
    assert out.column_names == fitted.output_columns


def test_fitted_json_round_trip(small_table):
    fitted, _ = fit_transform(small_table)
    back = FittedTransform.from_json(fitted.to_json())
    assert back.to_json() == fitted.to_json()
    assert apply(back, small_table).fingerprint() == apply(fitted, small_table).fingerprint()


def test_fit_does_not_read_held_out(small_table):
    a, _ = fit_transform(small_table.take(np.arange(200)))
    b, _ = fit_transform(small_table.take(np.arange(200)))
    assert a.to_json() == b.to_json()
    c, _ = fit_transform(small_table.take(np.arange(201)))
    assert c.to_json() != a.to_json()


def test_imputation_opt_in():
    rows = np.array([[1.0, np.nan], [2.0, 4.0], [3.0, 8.0], [np.nan, 6.0]])
    t = Table(["a", "b"], rows, [0, 1, 0, 1], allow_missing=True)
    with pytest.raises(DataError):
        fit_transform(t, only())
    fitted, out = fit_transform(t, only(impute=True))
    assert fitted.impute_medians == {"a": 2.0, "b": 6.0}
    np.testing.assert_array_equal(out.rows, [[1, 6], [2, 4], [3, 8], [2, 6]])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=4, max_size=60),
    st.floats(-1e5, 1e5, allow_nan=False),
)
def test_clipped_values_within_training_bounds(values, probe):
    x = np.array(values)
    t = Table(["a"], x[:, None], np.arange(x.size) % 2)
    fitted, _ = fit_transform(t, only(clip=True, clip_skip_binary=False))
    lo, hi = fitted.clip_bounds["a"]
    got = apply(fitted, Table(["a"], [[probe]], [0])).rows[0, 0]
    assert lo <= got <= hi
