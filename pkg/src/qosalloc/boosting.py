"""Gradient-boosted regression trees: squared-error and logistic objectives.

Trees are grown with exact greedy variance-reduction splits over sorted unique
feature values. The logistic objective fits tree structure on the negative
log-loss gradient and assigns Newton leaf values (sum g / sum h). Fits are
fully deterministic: ties break toward the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

_MIN_GAIN = 1e-12
_LEAF_CLIP = 20.0
_HESS_FLOOR = 1e-16


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


@dataclass
class RegressionTree:
    """Array-encoded binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return self.value[node]

    def predict_scalar(self, x) -> float:
        """Single-vector walk on plain Python scalars; hot path for control loops."""
        feature = self._feat_list
        i = 0
        while feature[i] >= 0:
            i = self._left_list[i] if x[feature[i]] <= self._thr_list[i] else self._right_list[i]
        return self._value_list[i]

    def __post_init__(self):
        self._feat_list = self.feature.tolist()
        self._thr_list = self.threshold.tolist()
        self._left_list = self.left.tolist()
        self._right_list = self.right.tolist()
        self._value_list = self.value.tolist()

    @property
    def n_nodes(self):
        return len(self.feature)

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)


@dataclass
class BoostedModel:
    """Additive tree ensemble: base_score + lr * sum(tree outputs)."""

    objective: str
    base_score: float
    learning_rate: float
    n_features: int
    trees: list = field(default_factory=list)
    gain_importance: np.ndarray | None = None
    train_loss: list = field(default_factory=list)

    def raw_predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        raw = self.raw_predict(X)
        return _sigmoid(raw) if self.objective == "logistic" else raw

    def predict_one(self, x) -> float:
        xs = [float(v) for v in x]
        if len(xs) != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {len(xs)}")
        raw = self.base_score
        for t in self.trees:  # same accumulation order as the vectorized path
            raw += self.learning_rate * t.predict_scalar(xs)
        return float(_sigmoid(raw)) if self.objective == "logistic" else float(raw)

    def feature_importance(self) -> np.ndarray:
        """Total variance-reduction gain accumulated per feature."""
        if self.gain_importance is None:
            return np.zeros(self.n_features)
        return self.gain_importance.copy()

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "boosted_trees",
            "objective": self.objective,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "gain_importance": None if self.gain_importance is None else self.gain_importance.tolist(),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        trees = [
            RegressionTree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=float),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                value=np.asarray(t["value"], dtype=float),
            )
            for t in d["trees"]
        ]
        gain = d.get("gain_importance")
        return cls(
            objective=d["objective"],
            base_score=d["base_score"],
            learning_rate=d["learning_rate"],
            n_features=d["n_features"],
            trees=trees,
            gain_importance=None if gain is None else np.asarray(gain, dtype=float),
        )

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "BoostedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _TreeBuilder:
    """Grows one tree on residual targets; optional Newton (g, h) leaf values."""

    def __init__(self, X, targets, max_depth, min_leaf, grad=None, hess=None):
        self.X = X
        self.t = targets
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.grad = grad
        self.hess = hess
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.gains = np.zeros(X.shape[1])

    def build(self):
        self._grow(np.arange(len(self.t)), 0)
        return (
            RegressionTree(
                feature=np.asarray(self.feature, dtype=np.int64),
                threshold=np.asarray(self.threshold, dtype=float),
                left=np.asarray(self.left, dtype=np.int64),
                right=np.asarray(self.right, dtype=np.int64),
                value=np.asarray(self.value, dtype=float),
            ),
            self.gains,
        )

    def _leaf_value(self, idx) -> float:
        if self.grad is None:
            return float(self.t[idx].mean())
        g = self.grad[idx].sum()
        h = max(self.hess[idx].sum(), _HESS_FLOOR)
        return float(np.clip(g / h, -_LEAF_CLIP, _LEAF_CLIP))

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _grow(self, idx, depth) -> int:
        node = self._new_node()
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf:
            self.value[node] = self._leaf_value(idx)
            return node
        split = self._best_split(idx)
        if split is None:
            self.value[node] = self._leaf_value(idx)
            return node
        j, thr, gain = split
        self.gains[j] += gain
        go_left = self.X[idx, j] <= thr
        self.feature[node] = j
        self.threshold[node] = thr
        self.left[node] = self._grow(idx[go_left], depth + 1)
        self.right[node] = self._grow(idx[~go_left], depth + 1)
        return node

    def _best_split(self, idx):
        t = self.t[idx]
        n = len(t)
        total = t.sum()
        best = None
        for j in range(self.X.shape[1]):
            xs = self.X[idx, j]
            order = np.argsort(xs, kind="stable")
            xs = xs[order]
            ts = t[order]
            csum = np.cumsum(ts)[:-1]
            nl = np.arange(1, n, dtype=float)
            valid = xs[:-1] < xs[1:]
            if self.min_leaf > 1:
                valid &= (nl >= self.min_leaf) & (n - nl >= self.min_leaf)
            if not np.any(valid):
                continue
            gain = csum**2 / nl + (total - csum) ** 2 / (n - nl) - total**2 / n
            gain[~valid] = -np.inf
            pos = int(np.argmax(gain))
            if gain[pos] > _MIN_GAIN and (best is None or gain[pos] > best[2]):
                thr = 0.5 * (xs[pos] + xs[pos + 1])
                best = (j, float(thr), float(gain[pos]))
        return best


def fit_boosted(X, y, estimators: int, depth: int, lr: float, objective: str = "squared", min_leaf: int = 1) -> BoostedModel:
    """Fit a boosted tree model; training loss per round is recorded on the model."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if len(y) < 2:
        raise ValueError("need at least two training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    if estimators < 1 or depth < 0:
        raise ValueError("estimators must be >= 1 and depth >= 0")
    if objective not in ("squared", "logistic"):
        raise ValueError(f"unknown objective {objective!r}")

    if objective == "logistic":
        classes = np.unique(y)
        if not np.all(np.isin(classes, (0.0, 1.0))):
            raise ValueError("logistic objective requires 0/1 targets")
        p0 = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
        base = float(np.log(p0 / (1.0 - p0)))
    else:
        base = float(y.mean())

    model = BoostedModel(
        objective=objective,
        base_score=base,
        learning_rate=float(lr),
        n_features=X.shape[1],
        gain_importance=np.zeros(X.shape[1]),
    )
    raw = np.full(len(y), base)
    for _ in range(estimators):
        if objective == "logistic":
            p = _sigmoid(raw)
            grad = y - p  # negative gradient of log-loss
            hess = p * (1.0 - p)
            builder = _TreeBuilder(X, grad, depth, min_leaf, grad=grad, hess=hess)
        else:
            builder = _TreeBuilder(X, y - raw, depth, min_leaf)
        tree, gains = builder.build()
        model.trees.append(tree)
        model.gain_importance += gains
        raw += lr * tree.predict(X)
        if objective == "logistic":
            p = np.clip(_sigmoid(raw), 1e-12, 1.0 - 1e-12)
            loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
        else:
            loss = float(np.mean((y - raw) ** 2))
        model.train_loss.append(loss)
    return model


def predict_boosted(model: BoostedModel, x) -> float:
    """Scalar prediction for one feature vector (probability for logistic)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != model.n_features:
        raise ValueError(f"expected a vector of {model.n_features} features")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return model.predict_one(x)
