"""Binary correct/incorrect classifiers over pooled feature vectors.

Variable-length feature matrices are pooled to fixed vectors (per-coefficient
mean and population std, length 2C). All three learners standardize features
with train-set statistics. Ties anywhere (KNN votes, tree leaves, zero SVM
margin) resolve to Incorrect: for a screening tool a false alarm is cheaper
than a miss.

One model is trained per letter; the caller picks the model for the letter
being practiced.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import Label, stratified_kfold
from .errors import ArpaError
from .features import FeatureMatrix

MODEL_FILE_VERSION = 1


class KTooLargeError(ArpaError):
    """KNN needs at least k training vectors."""


class SingleClassError(ArpaError):
    """SVM training requires both classes present."""


class DimensionMismatchError(ArpaError):
    """Query vector length does not match the trained model."""


class VersionMismatchError(ArpaError):
    """Model file written by an incompatible format version."""


class ModelParseError(ArpaError):
    """Model file is not valid JSON or is missing required fields."""


@dataclass
class FeatureVector:
    values: np.ndarray
    letter_id: str = ""
    label: Label | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def pool(m: FeatureMatrix) -> np.ndarray:
    """[mean_1..mean_C, std_1..std_C] over frames; population std, so a
    single-frame matrix pools to zero stds."""
    means = m.values.mean(axis=0)
    stds = m.values.std(axis=0)  # ddof=0
    return np.concatenate([means, stds])


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        std = x.std(axis=0)
        std[std == 0.0] = 1.0  # constant dimensions pass through unscaled
        return cls(x.mean(axis=0), std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass
class KnnModel:
    kind = "knn"
    k: int
    x: np.ndarray  # standardized training vectors
    y: np.ndarray  # 1 = Correct, 0 = Incorrect
    scaler: Scaler
    letter_id: str = ""


@dataclass
class LinearSvmModel:
    kind = "svm"
    w: np.ndarray
    b: float
    scaler: Scaler
    letter_id: str = ""


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    label: int = 0
    purity: float = 1.0


@dataclass
class TreeModel:
    kind = "tree"
    nodes: list[TreeNode]
    scaler: Scaler
    letter_id: str = ""


TrainedModel = KnnModel | LinearSvmModel | TreeModel


def _to_xy(data: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([v.values for v in data], dtype=np.float64)
    y = np.array([1 if v.label is Label.CORRECT else 0 for v in data], dtype=np.int64)
    return x, y


def train_knn(data: list[FeatureVector], k: int = 5, letter_id: str = "") -> KnnModel:
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer")
    if k > len(data):
        raise KTooLargeError(f"k={k} but only {len(data)} training vectors")
    x, y = _to_xy(data)
    scaler = Scaler.fit(x)
    return KnnModel(k=k, x=scaler.transform(x), y=y, scaler=scaler, letter_id=letter_id)


def train_linear_svm(
    data: list[FeatureVector],
    lam: float = 0.01,
    epochs: int = 300,
    seed: int = 0,
    letter_id: str = "",
) -> LinearSvmModel:
    """Regularized hinge loss minimized by subgradient steps of size
    1/(lam*t) on the full-dataset average, so the fit depends on the data
    distribution, not the sample order or multiplicity."""
    if lam <= 0 or epochs < 1:
        raise ValueError("lam must be positive and epochs >= 1")
    x, y01 = _to_xy(data)
    if len(set(y01.tolist())) < 2:
        raise SingleClassError("both classes are required to fit an SVM")
    scaler = Scaler.fit(x)
    xs = scaler.transform(x)
    y = 2.0 * y01 - 1.0  # Correct -> +1
    n, d = xs.shape
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, d)
    b = 0.0
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        active = y * (xs @ w + b) < 1.0
        grad_w = lam * w - (y[active, None] * xs[active]).sum(axis=0) / n
        w = w - eta * grad_w
        b = b + eta * y[active].sum() / n
    return LinearSvmModel(w=w, b=float(b), scaler=scaler, letter_id=letter_id)


def _gini(n_pos: int, n: int) -> float:
    if n == 0:
        return 0.0
    p = n_pos / n
    return 2.0 * p * (1.0 - p)


def _majority(y: np.ndarray) -> tuple[int, float]:
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    label = 1 if n_pos > n_neg else 0  # tie -> Incorrect
    purity = (n_pos if label == 1 else n_neg) / len(y)
    return label, purity


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[int, float, float] | None:
    """Minimum weighted-Gini (feature, threshold); thresholds are midpoints of
    consecutive distinct sorted values. None when no split leaves min_leaf on
    both sides."""
    n = len(y)
    best = None
    best_score = math.inf
    for d in range(x.shape[1]):
        order = np.argsort(x[:, d], kind="stable")
        xs = x[order, d]
        ys = y[order]
        pos_prefix = np.cumsum(ys)
        for i in range(min_leaf - 1, n - min_leaf):
            if xs[i] == xs[i + 1]:
                continue
            left_n = i + 1
            left_pos = int(pos_prefix[i])
            right_n = n - left_n
            right_pos = int(pos_prefix[-1]) - left_pos
            score = (left_n * _gini(left_pos, left_n) + right_n * _gini(right_pos, right_n)) / n
            if score < best_score - 1e-15:
                best_score = score
                best = (d, (xs[i] + xs[i + 1]) / 2.0, score)
    return best


def train_decision_tree(
    data: list[FeatureVector],
    max_depth: int = 8,
    min_leaf: int = 1,
    letter_id: str = "",
) -> TreeModel:
    if max_depth < 1 or min_leaf < 1:
        raise ValueError("max_depth and min_leaf must be >= 1")
    x, y = _to_xy(data)
    scaler = Scaler.fit(x)
    xs = scaler.transform(x)
    nodes: list[TreeNode] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(TreeNode())
        yi = y[idx]
        label, purity = _majority(yi)
        split = None
        if depth < max_depth and 0 < yi.sum() < len(yi):
            split = _best_split(xs[idx], yi, min_leaf)
        if split is None:
            nodes[node_id].label = label
            nodes[node_id].purity = purity
            return node_id
        d, threshold, _ = split
        mask = xs[idx, d] <= threshold
        nodes[node_id].feature = d
        nodes[node_id].threshold = float(threshold)
        nodes[node_id].left = build(idx[mask], depth + 1)
        nodes[node_id].right = build(idx[~mask], depth + 1)
        return node_id

    build(np.arange(len(y)), 0)
    return TreeModel(nodes=nodes, scaler=scaler, letter_id=letter_id)


def predict(model: TrainedModel, v: FeatureVector | np.ndarray) -> tuple[Label, float]:
    """Label plus a confidence score in [0, 1]: vote fraction for KNN, sigmoid
    of the margin for SVM, leaf purity for the tree."""
    x = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)
    if x.shape != model.scaler.mean.shape:
        raise DimensionMismatchError(f"vector has {x.shape}, model expects {model.scaler.mean.shape}")
    xs = model.scaler.transform(x)
    if isinstance(model, KnnModel):
        dist = np.sqrt(((model.x - xs) ** 2).sum(axis=1))
        nearest = np.argsort(dist, kind="stable")[: model.k]
        votes = int(model.y[nearest].sum())
        label = Label.CORRECT if votes > model.k - votes else Label.INCORRECT
        score = (votes if label is Label.CORRECT else model.k - votes) / model.k
        return label, score
    if isinstance(model, LinearSvmModel):
        margin = float(model.w @ xs + model.b)
        label = Label.CORRECT if margin > 0 else Label.INCORRECT
        return label, 1.0 / (1.0 + math.exp(-margin))
    if isinstance(model, TreeModel):
        node = model.nodes[0]
        while node.feature >= 0:
            node = model.nodes[node.left if xs[node.feature] <= node.threshold else node.right]
        return (Label.CORRECT if node.label == 1 else Label.INCORRECT), node.purity
    raise TypeError(f"unknown model type {type(model)!r}")


MODEL_KINDS = ("knn", "svm", "tree")


def train_model(kind: str, data: list[FeatureVector], params: dict, seed: int = 0, letter_id: str = "") -> TrainedModel:
    if kind == "knn":
        return train_knn(data, letter_id=letter_id, **params)
    if kind == "svm":
        return train_linear_svm(data, seed=seed, letter_id=letter_id, **params)
    if kind == "tree":
        return train_decision_tree(data, letter_id=letter_id, **params)
    raise ValueError(f"unknown model kind {kind!r} (expected one of {MODEL_KINDS})")


def cross_validate_vectors(
    vectors: list[FeatureVector],
    kind: str,
    params: dict,
    k: int,
    seed: int = 0,
) -> tuple[list[float], list[tuple[Label, Label]]]:
    """Stratified k-fold CV with one model per letter per fold. Returns
    per-fold accuracies and all pooled (predicted, actual) pairs."""
    keys = [(v.letter_id, v.label.value if v.label else "") for v in vectors]
    fold_of = stratified_kfold(keys, k, seed)
    fold_acc = []
    pairs: list[tuple[Label, Label]] = []
    for fold in range(k):
        train = [v for v, f in zip(vectors, fold_of) if f != fold]
        test = [v for v, f in zip(vectors, fold_of) if f == fold]
        by_letter: dict[str, list[FeatureVector]] = {}
        for v in train:
            by_letter.setdefault(v.letter_id, []).append(v)
        models = {
            letter: train_model(kind, group, params, seed=seed, letter_id=letter)
            for letter, group in by_letter.items()
        }
        correct = 0
        for v in test:
            predicted, _ = predict(models[v.letter_id], v)
            pairs.append((predicted, v.label))
            correct += predicted is v.label
        fold_acc.append(correct / len(test) if test else 0.0)
    return fold_acc, pairs


@dataclass
class GridSearchResult:
    grid: list[dict]
    fold_accuracies: list[list[float]]  # |grid| rows x folds columns
    mean_accuracies: list[float] = field(default_factory=list)
    best_index: int = 0

    @property
    def best_params(self) -> dict:
        return self.grid[self.best_index]


def grid_search(
    vectors: list[FeatureVector],
    kind: str,
    grid: list[dict],
    folds: int = 5,
    seed: int = 0,
) -> GridSearchResult:
    """Exhaustive CV over the grid; best = highest mean accuracy, ties going
    to the earlier grid entry."""
    if not grid:
        raise ValueError("grid must be non-empty")
    table = []
    means = []
    for params in grid:
        acc, _ = cross_validate_vectors(vectors, kind, params, folds, seed)
        table.append(acc)
        means.append(sum(acc) / len(acc))
    best = 0
    for i, m in enumerate(means):
        if m > means[best]:
            best = i
    return GridSearchResult(grid=list(grid), fold_accuracies=table, mean_accuracies=means, best_index=best)


# --- model files ------------------------------------------------------------


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode(s: str, shape=None) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(s), dtype="<f8")
    return a.reshape(shape) if shape is not None else a.copy()


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "version": MODEL_FILE_VERSION,
        "kind": model.kind,
        "letter": model.letter_id,
        "scaler": {"mean": _encode(model.scaler.mean), "std": _encode(model.scaler.std)},
    }
    if isinstance(model, KnnModel):
        doc["params"] = {"k": model.k}
        doc["arrays"] = {"x": _encode(model.x), "shape": list(model.x.shape), "y": _encode(model.y)}
    elif isinstance(model, LinearSvmModel):
        doc["params"] = {}
        doc["arrays"] = {"w": _encode(model.w), "b": model.b}
    elif isinstance(model, TreeModel):
        doc["params"] = {}
        doc["arrays"] = {
            "nodes": [
                [n.feature, n.threshold, n.left, n.right, n.label, n.purity] for n in model.nodes
            ]
        }
    else:
        raise TypeError(f"cannot save model of type {type(model)!r}")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        version = doc["version"]
        if version != MODEL_FILE_VERSION:
            raise VersionMismatchError(f"{path}: model file version {version}, expected {MODEL_FILE_VERSION}")
        scaler = Scaler(_decode(doc["scaler"]["mean"]), _decode(doc["scaler"]["std"]))
        kind = doc["kind"]
        letter = doc.get("letter", "")
        arrays = doc["arrays"]
        if kind == "knn":
            x = _decode(arrays["x"], tuple(arrays["shape"]))
            y = _decode(arrays["y"]).astype(np.int64)
            return KnnModel(k=int(doc["params"]["k"]), x=x, y=y, scaler=scaler, letter_id=letter)
        if kind == "svm":
            return LinearSvmModel(w=_decode(arrays["w"]), b=float(arrays["b"]), scaler=scaler, letter_id=letter)
        if kind == "tree":
            nodes = [
                TreeNode(int(f), float(t), int(l), int(r), int(lbl), float(p))
                for f, t, l, r, lbl, p in arrays["nodes"]
            ]
            return TreeModel(nodes=nodes, scaler=scaler, letter_id=letter)
        raise ModelParseError(f"{path}: unknown model kind {kind!r}")
    except VersionMismatchError:
        raise
    except ModelParseError:
        raise
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ModelParseError(f"{path}: {exc}") from exc
