import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alzens.dataset import Table, class_counts
from alzens.errors import DataError, TooFewMinority
from alzens.resample import ResamplePlan, smote, smote_tomek, synthesize, tomek_links

from conftest import blobs
from oracles import mutual_nn_links


def test_synthesize_example():
    out = synthesize(np.array([[0.0, 0.0]]), np.array([[2.0, 4.0]]), np.array([0.25]))
    np.testing.assert_array_equal(out, [[0.5, 1.0]])


def imbalanced(n0=60, n1=15, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n0, 3)), rng.normal(1.5, 1, (n1, 3))])
    return Table(["a", "b", "c"], X, np.repeat([0, 1], [n0, n1]))


def test_smote_reaches_target_ratio_exactly():
    t = imbalanced()
    out = smote(t, ResamplePlan(target_ratio=1.0))
    assert class_counts(out) == {0: 60, 1: 60}
    half = smote(t, ResamplePlan(target_ratio=0.5))
    assert class_counts(half) == {0: 60, 1: 30}


def test_smote_keeps_original_rows_first():
    t = imbalanced()
    out = smote(t, ResamplePlan())
    np.testing.assert_array_equal(out.rows[: t.n_samples], t.rows)


def test_synthetic_rows_lie_on_parent_segment():
    t = imbalanced()
    out, parents = smote(t, ResamplePlan(seed=4), return_parents=True)
    new = out.rows[t.n_samples :]
    assert parents.shape == (new.shape[0], 2)
    for row, (b, n) in zip(new, parents):
        assert t.labels[b] == 1 and t.labels[n] == 1 and b != n
        d = t.rows[n] - t.rows[b]
        u = np.dot(row - t.rows[b], d) / np.dot(d, d)
        assert -1e-12 <= u <= 1 + 1e-12
        np.testing.assert_allclose(row, t.rows[b] + u * d, atol=1e-12)


def test_smote_no_op_when_balanced():
    t = imbalanced(20, 20)
    assert smote(t, ResamplePlan()).fingerprint() == t.fingerprint()


def test_smote_too_few_minority():
    with pytest.raises(TooFewMinority):
        smote(imbalanced(30, 3), ResamplePlan(k_neighbors=5))


def test_smote_is_seeded():
    t = imbalanced()
    a = smote(t, ResamplePlan(seed=1))
    assert a.fingerprint() == smote(t, ResamplePlan(seed=1)).fingerprint()
    assert a.fingerprint() != smote(t, ResamplePlan(seed=2)).fingerprint()


def test_plan_validation():
    for bad in ({"k_neighbors": 0}, {"target_ratio": 0.0}, {"target_ratio": 1.5}, {"link_removal": "x"}):
        with pytest.raises(DataError):
            ResamplePlan(**bad)


def test_tomek_simple_pair():
    t = Table(["x"], np.array([[0.0], [0.1], [5.0], [5.2], [9.0]]), [0, 1, 0, 0, 1])
    assert tomek_links(t) == [(0, 1)]


def test_tomek_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.normal(size=(80, 2))
        y = rng.integers(0, 2, 80)
        t = Table(["a", "b"], X, y)
        assert tomek_links(t) == mutual_nn_links(X, y)


def test_smote_tomek_majority_only():
    t = imbalanced(80, 25, seed=2)
    out, report = smote_tomek(t, ResamplePlan(seed=3))
    assert report["after_smote"] == {"0": 80, "1": 80}
    assert report["after"]["1"] == 80
    assert report["after"]["0"] == 80 - report["links_removed"]
    assert report["links_found"] == report["links_removed"]
    assert class_counts(out) == {0: report["after"]["0"], 1: report["after"]["1"]}


def test_smote_tomek_both_policy():
    t = imbalanced(80, 25, seed=2)
    out, report = smote_tomek(t, ResamplePlan(seed=3, link_removal="both"))
    assert report["links_removed"] == 2 * report["links_found"]
    assert out.n_samples == 160 - report["links_removed"]


def test_no_links_in_separated_blobs():
    out, report = smote_tomek(blobs(30, gap=20.0), ResamplePlan())
    assert report["links_found"] == 0 and out.n_samples == 60


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(6, 30), st.integers(31, 80))
def test_synthetic_rows_in_minority_bounding_box(seed, n1, n0):
    t = imbalanced(n0, n1, seed % 1000)
    out = smote(t, ResamplePlan(seed=seed))
    mins = t.rows[t.labels == 1]
    new = out.rows[t.n_samples :]
    assert np.all(new >= mins.min(axis=0) - 1e-12) and np.all(new <= mins.max(axis=0) + 1e-12)


def test_identical_minority_points_reproduce_themselves():
    rows = np.vstack([np.random.default_rng(0).normal(size=(20, 2)), np.tile([3.0, -1.0], (7, 1))])
    t = Table(["a", "b"], rows, np.repeat([0, 1], [20, 7]))
    out = smote(t, ResamplePlan())
    np.testing.assert_array_equal(out.rows[t.n_samples :], np.tile([3.0, -1.0], (13, 1)))


def test_interpolation_example():
    np.testing.assert_array_equal(synthesize(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]), np.array([0.5])), [[0.5, 0.5]])


def test_tomek_spec_example_and_single_class():
    t = Table(["x", "y"], [[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]], [0, 1, 0])
    assert tomek_links(t) == [(0, 1)]
    same = Table(["x"], np.random.default_rng(0).normal(size=(30, 1)), np.zeros(30))
    assert tomek_links(same) == []


def test_study_training_split_balances_to_972(study_table):
    from alzens.dataset import stratified_two_stage_split

    split = stratified_two_stage_split(study_table, 0.15, 0.15, seed=0)
    train = study_table.take(split.train)
    assert class_counts(train) == {0: 972, 1: 532}
    assert class_counts(smote(train, ResamplePlan())) == {0: 972, 1: 972}


def test_separated_classes_equal_smote_output():
    t = blobs(30, gap=20.0)
    t = t.take(np.arange(45))  # 30 vs 15
    out, _ = smote_tomek(t, ResamplePlan(seed=2))
    assert out.fingerprint() == smote(t, ResamplePlan(seed=2)).fingerprint()


@pytest.mark.parametrize("seed", range(5))
def test_hybrid_count_bounds(seed):
    t = imbalanced(35, 15, seed=seed)
    oversampled = smote(t, ResamplePlan(seed=seed))
    out, report = smote_tomek(t, ResamplePlan(seed=seed))
    counts = class_counts(out)
    assert counts[1] >= 15
    assert counts[0] <= class_counts(oversampled)[0]
    removed = set(report["removed_rows"])
    assert report["after"] == {
        str(c): int(sum(1 for i in range(oversampled.n_samples) if i not in removed and oversampled.labels[i] == c))
        for c in (0, 1)
    }
