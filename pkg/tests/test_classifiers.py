import numpy as np
import pytest

from arpa.classifiers import (
    DimensionMismatchError,
    FeatureVector,
    KTooLargeError,
    LinearSvmModel,
    ModelParseError,
    Scaler,
    SingleClassError,
    TreeModel,
    TreeNode,
    VersionMismatchError,
    _gini,
    grid_search,
    load_model,
    pool,
    predict,
    save_model,
    train_decision_tree,
    train_knn,
    train_linear_svm,
)
from arpa.dataset import Label
from arpa.features import FeatureKind, FeatureMatrix


def fv(values, label=Label.CORRECT, letter="raa"):
    return FeatureVector(np.atleast_1d(np.asarray(values, dtype=float)), letter, label)


def gaussian_blobs(n_per_class=100, dim=2, gap=4.0, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    pos = rng.normal(0, spread, (n_per_class, dim)) + np.r_[gap / 2, np.zeros(dim - 1)]
    neg = rng.normal(0, spread, (n_per_class, dim)) - np.r_[gap / 2, np.zeros(dim - 1)]
    data = [fv(p, Label.CORRECT) for p in pos] + [fv(q, Label.INCORRECT) for q in neg]
    return data


# --- pooling -----------------------------------------------------------------


def test_pool_identical_frames():
    m = FeatureMatrix(np.array([[1.0, 2.0], [1.0, 2.0]]), FeatureKind.MFCC)
    assert np.array_equal(pool(m), [1.0, 2.0, 0.0, 0.0])


def test_pool_population_std():
    m = FeatureMatrix(np.array([[0.0], [2.0]]), FeatureKind.MFCC)
    assert np.array_equal(pool(m), [1.0, 1.0])


def test_pool_matches_naive():
    rng = np.random.default_rng(8)
    values = rng.normal(0, 2, (50, 13))
    got = pool(FeatureMatrix(values, FeatureKind.MFCC))
    for c in range(13):
        col = values[:, c]
        assert got[c] == pytest.approx(col.sum() / 50, abs=1e-12)
        assert got[13 + c] == pytest.approx(np.sqrt(((col - col.mean()) ** 2).sum() / 50), abs=1e-12)


def test_pool_single_frame_zero_std():
    got = pool(FeatureMatrix(np.array([[3.0, -1.0]]), FeatureKind.MFCC))
    assert np.array_equal(got, [3.0, -1.0, 0.0, 0.0])


# --- knn ---------------------------------------------------------------------


def knn_1d_fixture():
    return [fv(0.0, Label.CORRECT), fv(1.0, Label.CORRECT), fv(10.0, Label.INCORRECT)]


def test_knn_k1():
    model = train_knn(knn_1d_fixture(), k=1)
    label, score = predict(model, fv(0.5))
    assert label is Label.CORRECT and score == 1.0


def test_knn_k3_majority():
    model = train_knn(knn_1d_fixture(), k=3)
    label, score = predict(model, fv(0.5))
    assert label is Label.CORRECT
    assert score == pytest.approx(2 / 3)


def test_knn_matches_brute_force():
    data = gaussian_blobs(100, seed=3)
    model = train_knn(data, k=5)
    rng = np.random.default_rng(4)
    x_train = np.array([v.values for v in data])
    y_train = np.array([v.label is Label.CORRECT for v in data])
    mean, std = x_train.mean(axis=0), x_train.std(axis=0)
    for _ in range(50):
        q = rng.normal(0, 3, 2)
        qs = (q - mean) / std
        dist = np.sqrt((((x_train - mean) / std - qs) ** 2).sum(axis=1))
        votes = y_train[np.argsort(dist, kind="stable")[:5]].sum()
        expected = Label.CORRECT if votes >= 3 else Label.INCORRECT
        assert predict(model, fv(q))[0] is expected


def test_knn_k_too_large():
    with pytest.raises(KTooLargeError):
        train_knn(knn_1d_fixture(), k=5)
    with pytest.raises(ValueError):
        train_knn(knn_1d_fixture(), k=2)


def test_knn_standardization_invariance():
    data = gaussian_blobs(40, dim=3, seed=6)
    model = train_knn(data, k=5)
    scaled = [FeatureVector(v.values * [100.0, 1.0, 0.01], v.letter_id, v.label) for v in data]
    model_scaled = train_knn(scaled, k=5)
    rng = np.random.default_rng(7)
    for _ in range(30):
        q = rng.normal(0, 3, 3)
        assert predict(model, fv(q))[0] is predict(model_scaled, fv(q * [100.0, 1.0, 0.01]))[0]


def test_knn_k1_memorizes_training_set():
    data = gaussian_blobs(30, seed=9)
    model = train_knn(data, k=1)
    assert all(predict(model, v)[0] is v.label for v in data)


# --- svm ---------------------------------------------------------------------


def test_svm_separable_clusters():
    data = gaussian_blobs(50, gap=4.0, seed=1, spread=0.5)
    model = train_linear_svm(data, lam=0.01, epochs=300, seed=0)
    assert all(predict(model, v)[0] is v.label for v in data)


def test_svm_mirrored_data_flips_predictions():
    data = gaussian_blobs(50, gap=4.0, seed=2, spread=0.5)
    mirrored = [
        FeatureVector(-v.values, v.letter_id, Label.INCORRECT if v.label is Label.CORRECT else Label.CORRECT)
        for v in data
    ]
    a = train_linear_svm(data, seed=0)
    b = train_linear_svm(mirrored, seed=0)
    rng = np.random.default_rng(3)
    for _ in range(30):
        q = rng.normal(0, 2, 2)
        la, _ = predict(a, fv(q))
        lb, _ = predict(b, fv(-q))
        assert {la, lb} == {Label.CORRECT, Label.INCORRECT} or (la is lb is Label.INCORRECT)


def test_svm_duplicate_invariance():
    data = gaussian_blobs(40, seed=5, spread=0.8)
    a = train_linear_svm(data, seed=0)
    b = train_linear_svm(data + data, seed=0)
    assert np.abs(a.w - b.w).max() < 1e-9
    assert abs(a.b - b.b) < 1e-9


def test_svm_single_class():
    with pytest.raises(SingleClassError):
        train_linear_svm([fv(0.0), fv(1.0)])


# --- decision tree -----------------------------------------------------------


def test_tree_pure_data_single_leaf():
    data = [fv([1.0, 2.0]), fv([3.0, 4.0])]
    model = train_decision_tree(data)
    assert len(model.nodes) == 1
    assert all(predict(model, v)[0] is v.label for v in data)


def test_gini_values():
    assert _gini(5, 10) == 0.5
    assert _gini(0, 10) == 0.0
    assert _gini(10, 10) == 0.0


def test_tree_1d_separable():
    data = [fv(x, Label.INCORRECT) for x in (0.0, 1.0, 2.0)] + [fv(x, Label.CORRECT) for x in (4.0, 5.0, 6.0)]
    model = train_decision_tree(data, max_depth=3)
    root = model.nodes[0]
    threshold_raw = root.threshold * model.scaler.std[0] + model.scaler.mean[0]
    assert 2.0 < threshold_raw < 4.0
    assert all(predict(model, v)[0] is v.label for v in data)


def test_tree_accuracy_nondecreasing_in_depth():
    data = gaussian_blobs(60, gap=1.5, seed=13, spread=1.0)
    accuracies = []
    for depth in (1, 2, 4, 8):
        model = train_decision_tree(data, max_depth=depth)
        accuracies.append(sum(predict(model, v)[0] is v.label for v in data))
    assert all(b >= a for a, b in zip(accuracies, accuracies[1:]))


def test_tree_min_leaf():
    data = gaussian_blobs(20, seed=14)
    model = train_decision_tree(data, max_depth=10, min_leaf=5)

    def leaf_sizes(node_id, idx):
        node = model.nodes[node_id]
        if node.feature < 0:
            return [len(idx)]
        x = np.array([model.scaler.transform(v.values) for v in data])
        mask = x[idx, node.feature] <= node.threshold
        return leaf_sizes(node.left, idx[mask]) + leaf_sizes(node.right, idx[~mask])

    assert min(leaf_sizes(0, np.arange(len(data)))) >= 5


# --- predict scores ----------------------------------------------------------


def test_knn_score_vote_fraction():
    data = [fv(0.0), fv(0.1), fv(0.2), fv(0.3), fv(10.0, Label.INCORRECT)]
    model = train_knn(data, k=5)
    label, score = predict(model, fv(0.15))
    assert label is Label.CORRECT and score == 0.8


def test_svm_zero_margin_score_half():
    model = LinearSvmModel(w=np.zeros(2), b=0.0, scaler=Scaler(np.zeros(2), np.ones(2)))
    label, score = predict(model, fv([1.0, -1.0]))
    assert label is Label.INCORRECT and score == 0.5  # sign 0 -> Incorrect


def test_tree_leaf_purity_score():
    model = TreeModel(nodes=[TreeNode(label=1, purity=0.9)], scaler=Scaler(np.zeros(1), np.ones(1)))
    label, score = predict(model, fv(0.0))
    assert label is Label.CORRECT and score == 0.9


def test_dimension_mismatch():
    model = train_knn(knn_1d_fixture(), k=1)
    with pytest.raises(DimensionMismatchError):
        predict(model, fv([1.0, 2.0]))


# --- grid search -------------------------------------------------------------


def test_grid_search_single_point():
    data = gaussian_blobs(20, seed=15)
    result = grid_search(data, "knn", [{"k": 3}], folds=4, seed=0)
    assert result.best_params == {"k": 3}


def test_grid_search_prefers_small_k_on_clusters():
    data = gaussian_blobs(30, gap=6.0, seed=16, spread=0.5)
    result = grid_search(data, "knn", [{"k": 1}, {"k": 47}], folds=5, seed=0)
    assert result.best_params == {"k": 1}


def test_grid_search_table_shape():
    data = gaussian_blobs(20, seed=17)
    result = grid_search(data, "tree", [{"max_depth": 1}, {"max_depth": 2}, {"max_depth": 3}], folds=4, seed=0)
    assert len(result.fold_accuracies) == 3
    assert all(len(row) == 4 for row in result.fold_accuracies)


# --- persistence -------------------------------------------------------------


@pytest.mark.parametrize("trainer", [
    lambda d: train_knn(d, k=5),
    lambda d: train_linear_svm(d, seed=0),
    lambda d: train_decision_tree(d, max_depth=6),
])
def test_model_roundtrip_predictions(tmp_path, trainer):
    data = gaussian_blobs(30, seed=18)
    model = trainer(data)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    rng = np.random.default_rng(19)
    for _ in range(100):
        q = fv(rng.normal(0, 3, 2))
        assert predict(model, q) == predict(loaded, q)


def test_model_version_mismatch(tmp_path):
    model = train_knn(knn_1d_fixture(), k=1)
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = path.read_text().replace('"version": 1', '"version": 999')
    path.write_text(doc)
    with pytest.raises(VersionMismatchError):
        load_model(path)


def test_model_truncated_file(tmp_path):
    model = train_knn(knn_1d_fixture(), k=1)
    path = tmp_path / "m.json"
    save_model(model, path)
    path.write_text(path.read_text()[: len(path.read_text()) // 2])
    with pytest.raises(ModelParseError):
        load_model(path)
