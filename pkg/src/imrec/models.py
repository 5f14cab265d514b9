"""From-scratch learners: Gaussian Naive Bayes, random forest, linear SVMs,
the negative-voting ensemble rule, and F1 threshold learning.

Every trainer is a deterministic function of (data, config, seed). Per-tree
and per-category RNGs are derived from (seed, index) so members are
independent of scheduling and of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from imrec.corpus import NUM_CATEGORIES, ImageCategory
from imrec.errors import DataError
from imrec.features import FeatureVector


def logistic(z: float) -> float:
    """Numerically stable 1/(1+e^-z)."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _as_matrix(X) -> tuple[np.ndarray, str | None]:
    """Accept a list of FeatureVector or a plain 2-D array; return (matrix, schema)."""
    if isinstance(X, np.ndarray):
        return np.asarray(X, dtype=np.float64), None
    vectors = list(X)
    if not vectors:
        return np.zeros((0, 0), dtype=np.float64), None
    if isinstance(vectors[0], FeatureVector):
        schemas = {v.schema_id for v in vectors}
        if len(schemas) != 1:
            raise DataError(f"feature vectors span multiple schemas: {sorted(schemas)}")
        return np.vstack([v.values for v in vectors]), vectors[0].schema_id
    return np.asarray(vectors, dtype=np.float64), None


def _as_vector(x, schema_id: str | None) -> np.ndarray:
    if isinstance(x, FeatureVector):
        if schema_id is not None and x.schema_id != schema_id:
            raise DataError(f"schema mismatch: model {schema_id}, input {x.schema_id}")
        return x.values
    return np.asarray(x, dtype=np.float64)


# --- Gaussian Naive Bayes ------------------------------------------------------

VAR_SMOOTHING_FACTOR = 1e-9


@dataclass(frozen=True, eq=False)
class GnbModel:
    classes: tuple[int, ...]
    priors: np.ndarray  # (C,)
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C, d), floored at var_smoothing
    var_smoothing: float
    schema_id: str | None = None


def train_gnb(X, y: Sequence[int]) -> GnbModel:
    """Maximum-likelihood per-class Gaussians (variance divided by n, not n-1)."""
    matrix, schema_id = _as_matrix(X)
    labels = np.asarray(list(y))
    if matrix.shape[0] != labels.shape[0]:
        raise DataError("X and y lengths differ")
    if matrix.shape[0] < 2:
        raise DataError("need at least 2 samples to train")
    classes = tuple(sorted({int(v) for v in labels}))
    if len(classes) < 2:
        raise DataError("degenerate training set: only one class present")
    n, d = matrix.shape
    pooled_var = matrix.var(axis=0)  # ML variance over the full sample
    max_pooled = float(pooled_var.max()) if d else 0.0
    smoothing = VAR_SMOOTHING_FACTOR * max_pooled if max_pooled > 0 else VAR_SMOOTHING_FACTOR
    priors = np.zeros(len(classes))
    means = np.zeros((len(classes), d))
    variances = np.zeros((len(classes), d))
    for ci, cls in enumerate(classes):
        rows = matrix[labels == cls]
        priors[ci] = rows.shape[0] / n
        means[ci] = rows.mean(axis=0)
        variances[ci] = np.maximum(rows.var(axis=0), smoothing)
    return GnbModel(
        classes=classes,
        priors=priors,
        means=means,
        variances=variances,
        var_smoothing=smoothing,
        schema_id=schema_id,
    )


def gnb_log_joint(model: GnbModel, x) -> np.ndarray:
    values = _as_vector(x, model.schema_id)
    if values.shape[0] != model.means.shape[1]:
        raise DataError(
            f"feature width mismatch: model {model.means.shape[1]}, input {values.shape[0]}"
        )
    log_prior = np.log(model.priors)
    log_density = -0.5 * (
        np.log(2.0 * math.pi * model.variances)
        + (values[None, :] - model.means) ** 2 / model.variances
    ).sum(axis=1)
    return log_prior + log_density


def gnb_predict_proba(model: GnbModel, x) -> np.ndarray:
    """Softmax over per-class log joints; sums to 1, finite for finite input."""
    joint = gnb_log_joint(model, x)
    shifted = joint - joint.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def gnb_positive_proba(model: GnbModel, x) -> float:
    """P(class 1) for a binary {0,1} model."""
    probs = gnb_predict_proba(model, x)
    return float(probs[model.classes.index(1)])


# --- Random forest -------------------------------------------------------------


@dataclass(frozen=True)
class TreeLeaf:
    fraction: float  # positive-class fraction at the leaf


@dataclass(frozen=True)
class TreeNode:
    feature: int
    threshold: float
    left: "TreeNode | TreeLeaf"
    right: "TreeNode | TreeLeaf"


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: int | None = None  # None -> floor(sqrt(d))
    min_samples_leaf: int = 1
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must be >= 1")


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeNode | TreeLeaf, ...]
    config: ForestConfig
    seed: int
    schema_id: str | None = None


def _gini(pos: int, total: int) -> float:
    if total == 0:
        return 0.0
    p = pos / total
    return 2.0 * p * (1.0 - p)


def _best_split(
    matrix: np.ndarray,
    labels: np.ndarray,
    feature_ids: np.ndarray,
    min_samples_leaf: int,
) -> tuple[int, float] | None:
    """Greedy Gini minimizer; ties go to the lowest feature index, then the
    lowest threshold (guaranteed by ascending scan order with strict updates)."""
    n = labels.shape[0]
    best: tuple[float, int, float] | None = None
    for f in np.sort(feature_ids):
        column = matrix[:, f]
        order = np.argsort(column, kind="stable")
        sorted_vals = column[order]
        sorted_labels = labels[order]
        total_pos = int(sorted_labels.sum())
        left_pos = 0
        for i in range(n - 1):
            left_pos += int(sorted_labels[i])
            if sorted_vals[i] == sorted_vals[i + 1]:
                continue
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_samples_leaf or n_right < min_samples_leaf:
                continue
            threshold = (float(sorted_vals[i]) + float(sorted_vals[i + 1])) / 2.0
            # midpoint can round to the upper value; such a split would send
            # everything left under the <= rule, so fall back to the lower value
            if threshold >= float(sorted_vals[i + 1]):
                threshold = float(sorted_vals[i])
            score = (
                n_left * _gini(left_pos, n_left) + n_right * _gini(total_pos - left_pos, n_right)
            ) / n
            if best is None or score < best[0]:
                best = (score, int(f), threshold)
    if best is None:
        return None
    return best[1], best[2]


def _grow_tree(
    matrix: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator | None,
    max_features: int,
    min_samples_leaf: int,
) -> TreeNode | TreeLeaf:
    n, d = matrix.shape
    pos = int(labels.sum())
    fraction = pos / n if n else 0.0
    if n < 2 or pos == 0 or pos == n or n < 2 * min_samples_leaf:
        return TreeLeaf(fraction=fraction)
    if rng is not None and max_features < d:
        feature_ids = rng.choice(d, size=max_features, replace=False)
    else:
        feature_ids = np.arange(d)
    split = _best_split(matrix, labels, feature_ids, min_samples_leaf)
    if split is None:
        return TreeLeaf(fraction=fraction)
    feature, threshold = split
    mask = matrix[:, feature] <= threshold
    left = _grow_tree(matrix[mask], labels[mask], rng, max_features, min_samples_leaf)
    right = _grow_tree(matrix[~mask], labels[~mask], rng, max_features, min_samples_leaf)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def train_forest(X, y: Sequence[int], config: ForestConfig, seed: int) -> ForestModel:
    matrix, schema_id = _as_matrix(X)
    labels = np.asarray([int(v) for v in y])
    if matrix.shape[0] != labels.shape[0]:
        raise DataError("X and y lengths differ")
    if matrix.shape[0] < 2:
        raise DataError("need at least 2 samples to train")
    if not set(np.unique(labels)) <= {0, 1}:
        raise DataError("forest training labels must be binary 0/1")
    n, d = matrix.shape
    max_features = config.max_features if config.max_features is not None else max(1, int(math.isqrt(d)))
    max_features = min(max_features, d)
    trees = []
    for i in range(config.n_trees):
        rng = np.random.default_rng([seed, i])
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
            sample_x, sample_y = matrix[idx], labels[idx]
        else:
            sample_x, sample_y = matrix, labels
        node_rng = rng if max_features < d else None
        trees.append(_grow_tree(sample_x, sample_y, node_rng, max_features, config.min_samples_leaf))
    return ForestModel(trees=tuple(trees), config=config, seed=seed, schema_id=schema_id)


def _tree_fraction(node: TreeNode | TreeLeaf, values: np.ndarray) -> float:
    while isinstance(node, TreeNode):
        node = node.left if values[node.feature] <= node.threshold else node.right
    return node.fraction


def forest_predict_proba(model: ForestModel, x) -> float:
    """Mean positive-class leaf fraction over the trees."""
    values = _as_vector(x, model.schema_id)
    return float(sum(_tree_fraction(t, values) for t in model.trees) / len(model.trees))


# --- Linear SVMs (Pegasos) ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SvmBinaryModel:
    weights: np.ndarray
    bias: float
    lam: float
    epochs: int
    seed: int
    schema_id: str | None = None


@dataclass(frozen=True, eq=False)
class SvmOvrModel:
    weights: np.ndarray  # (10, d)
    biases: np.ndarray  # (10,)
    lam: float
    epochs: int
    seed: int
    schema_id: str | None = None


def _pegasos(matrix: np.ndarray, signs: np.ndarray, lam: float, epochs: int, rng: np.random.Generator):
    """Stochastic subgradient descent with step 1/(lam*t); unregularized bias.

    The sample order is reshuffled once per epoch; the weights after the
    final epoch are the model (no averaging).
    """
    n, d = matrix.shape
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    t = 0
    indices = np.arange(n)
    for _ in range(epochs):
        rng.shuffle(indices)
        for idx in indices:
            t += 1
            eta = 1.0 / (lam * t)
            margin = signs[idx] * (float(matrix[idx] @ w) + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * signs[idx] * matrix[idx]
                b += eta * signs[idx]
    return w, b


def train_svm_binary(X, y: Sequence[int], lam: float = 1e-4, epochs: int = 20, seed: int = 0) -> SvmBinaryModel:
    matrix, schema_id = _as_matrix(X)
    labels = np.asarray([int(v) for v in y])
    if matrix.shape[0] != labels.shape[0]:
        raise DataError("X and y lengths differ")
    if matrix.shape[0] < 2:
        raise DataError("need at least 2 samples to train")
    signs = np.where(labels == 1, 1.0, -1.0)
    w, b = _pegasos(matrix, signs, lam, epochs, np.random.default_rng([seed]))
    return SvmBinaryModel(weights=w, bias=b, lam=lam, epochs=epochs, seed=seed, schema_id=schema_id)


def svm_binary_proba(model: SvmBinaryModel, x) -> float:
    values = _as_vector(x, model.schema_id)
    return logistic(float(values @ model.weights) + model.bias)


def train_svm_ovr(
    X,
    Y: Sequence[set[ImageCategory]],
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
) -> SvmOvrModel:
    """Ten independent Pegasos machines, category c against the rest.

    Machine c is seeded by (seed, c) so the categories train independently
    and could be parallelized without changing the result.
    """
    matrix, schema_id = _as_matrix(X)
    relevance = list(Y)
    if matrix.shape[0] != len(relevance):
        raise DataError("X and Y lengths differ")
    if matrix.shape[0] < 2:
        raise DataError("need at least 2 samples to train")
    n, d = matrix.shape
    weights = np.zeros((NUM_CATEGORIES, d))
    biases = np.zeros(NUM_CATEGORIES)
    for c in range(NUM_CATEGORIES):
        signs = np.array([1.0 if ImageCategory(c) in rel else -1.0 for rel in relevance])
        w, b = _pegasos(matrix, signs, lam, epochs, np.random.default_rng([seed, c]))
        weights[c] = w
        biases[c] = b
    return SvmOvrModel(weights=weights, biases=biases, lam=lam, epochs=epochs, seed=seed, schema_id=schema_id)


def svm_margins(model: SvmOvrModel, x) -> np.ndarray:
    """Raw decision values w.x + b per category."""
    values = _as_vector(x, model.schema_id)
    return model.weights @ values + model.biases


def svm_confidences(model: SvmOvrModel, x) -> np.ndarray:
    """Display confidences: logistic of each margin (monotone, rank-preserving)."""
    return np.array([logistic(float(m)) for m in svm_margins(model, x)])


# --- Necessity scorer dispatch ---------------------------------------------------


def train_necessity_scorer(
    kind: str,
    X,
    y: Sequence[int],
    *,
    forest_config: ForestConfig | None = None,
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
):
    """Train one stage-1 binary scorer by kind: forest, gnb, or svm."""
    if kind == "forest":
        return train_forest(X, y, forest_config or ForestConfig(), seed)
    if kind == "gnb":
        return train_gnb(X, y)
    if kind == "svm":
        return train_svm_binary(X, y, lam=lam, epochs=epochs, seed=seed)
    raise DataError(f"unknown necessity model kind {kind!r}")


def necessity_proba(kind: str, model, x) -> float:
    if kind == "forest":
        return forest_predict_proba(model, x)
    if kind == "gnb":
        return gnb_positive_proba(model, x)
    if kind == "svm":
        return svm_binary_proba(model, x)
    raise DataError(f"unknown necessity model kind {kind!r}")


# --- Ensemble rule and threshold learning ---------------------------------------


def ensemble_predict(
    member_probs: Sequence[float], member_thresholds: Sequence[float]
) -> tuple[bool, float]:
    """Negative voting: positive only on unanimity; any member vetoes.

    The reported probability is the minimum member probability — the
    binding constraint under the unanimity rule.
    """
    probs = list(member_probs)
    thresholds = list(member_thresholds)
    if not probs:
        raise DataError("ensemble needs at least one member")
    if len(probs) != len(thresholds):
        raise DataError("member probabilities and thresholds differ in length")
    needs_image = all(p >= t for p, t in zip(probs, thresholds))
    return needs_image, float(min(probs))


def _f1_at(preds: np.ndarray, truth: np.ndarray) -> float:
    tp = int(np.sum(preds & truth))
    fp = int(np.sum(preds & ~truth))
    fn = int(np.sum(~preds & truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def learn_threshold(probs: Sequence[float], y: Sequence[int]) -> float:
    """Lowest grid point in {0.00, 0.01, ..., 1.00} maximizing F1 of prob >= t."""
    p = np.asarray(list(probs), dtype=np.float64)
    truth = np.asarray([int(v) for v in y]) == 1
    if p.shape[0] == 0 or p.shape[0] != truth.shape[0]:
        raise DataError("probs and y must be equal-length and non-empty")
    if truth.all() or not truth.any():
        raise DataError("threshold learning needs both classes present")
    best_t = 0.0
    best_f1 = -1.0
    for i in range(101):
        t = i / 100.0
        f1 = _f1_at(p >= t, truth)
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    return best_t
