"""The four classifier families: naive Bayes, logistic regression,
gain-ratio decision tree, and random forest.

All models fit on float64 matrices with 0/1 labels and expose
``predict_proba`` returning the probability of the faulty (1) class.
Everything is deterministic under the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .dataset import Dataset

KINDS = ("naive-bayes", "logistic-regression", "decision-tree", "random-forest")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "random-forest"
    n_trees: int = 100
    min_leaf: int = 2
    l2: float = 1e-4
    max_iter: int = 1000
    tol: float = 1e-8
    var_floor: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind: {self.kind}")


def _state_for(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(1, np.uint64)


class GaussianNB:
    def fit(self, X, y, seed=0):
        self.var_floor = getattr(self, "var_floor", 1e-9)
        self.prior1 = float(y.mean())
        self.mu = np.empty((2, X.shape[1]))
        self.var = np.empty((2, X.shape[1]))
        for c in (0, 1):
            rows = X[y == c]
            if rows.shape[0] == 0:
                self.mu[c] = 0.0
                self.var[c] = 1.0
            else:
                self.mu[c] = rows.mean(axis=0)
                self.var[c] = np.maximum(rows.var(axis=0), self.var_floor)
        return self

    def predict_proba(self, X):
        logp = []
        priors = (1.0 - self.prior1, self.prior1)
        for c in (0, 1):
            if priors[c] == 0.0:
                logp.append(np.full(X.shape[0], -np.inf))
                continue
            ll = -0.5 * (
                np.log(2.0 * np.pi * self.var[c])
                + (X - self.mu[c]) ** 2 / self.var[c]
            ).sum(axis=1)
            logp.append(ll + np.log(priors[c]))
        a = np.vstack(logp)
        a -= a.max(axis=0)
        e = np.exp(a)
        return e[1] / e.sum(axis=0)


class LogisticRegression:
    """L2-regularized logistic regression fit by gradient descent with a
    Lipschitz step size; features are standardized internally."""

    def __init__(self, l2=1e-4, max_iter=1000, tol=1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y, seed=0):
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        self.std = std
        Z = (X - self.mean) / self.std
        n, p = Z.shape
        w = np.zeros(p)
        b = 0.0
        yf = y.astype(np.float64)
        lip = (Z * Z).sum() / (4.0 * n) + 0.25 + self.l2
        step = 1.0 / lip
        for _ in range(self.max_iter):
            z = Z @ w + b
            pred = 1.0 / (1.0 + np.exp(-z))
            err = pred - yf
            gw = Z.T @ err / n + self.l2 * w
            gb = err.mean()
            w -= step * gw
            b -= step * gb
            if max(np.abs(gw).max(initial=0.0), abs(gb)) < self.tol:
                break
        self.w = w
        self.b = b
        return self

    def predict_proba(self, X):
        z = ((X - self.mean) / self.std) @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class DecisionTree:
    """C4.5-style entropy tree with gain-ratio splits, min-leaf 2, no
    pruning; all features are candidates at every split."""

    def __init__(self, min_leaf=2):
        self.min_leaf = min_leaf

    def fit(self, X, y, seed=0):
        state = _state_for(seed)
        X = np.ascontiguousarray(X, dtype=np.float64)
        self.nodes = kernels.grow_tree(
            X, y.astype(np.float64), self.min_leaf, X.shape[1], state
        )
        return self

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.predict_tree(*self.nodes, X)


class RandomForest:
    """Bagged gain-ratio trees with ceil(sqrt(p)) features per split.

    The forest probability is the fraction of trees voting faulty; out-of-bag
    masks are kept for permutation importance.
    """

    def __init__(self, n_trees=100, min_leaf=2):
        self.n_trees = n_trees
        self.min_leaf = min_leaf

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        n, p = X.shape
        mtry = int(np.ceil(np.sqrt(p)))
        state = _state_for(seed)
        (
            self.feat,
            self.thr,
            self.left,
            self.right,
            self.prob,
            self.counts,
            self.inbag,
        ) = kernels.grow_forest(
            X, y.astype(np.float64), self.n_trees, self.min_leaf, mtry, state
        )
        return self

    def tree_predict(self, t: int, X) -> np.ndarray:
        """Leaf probabilities of tree t."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        c = self.counts[t]
        return kernels.predict_tree(
            self.feat[t, :c],
            self.thr[t, :c],
            self.left[t, :c],
            self.right[t, :c],
            self.prob[t, :c],
            X,
        )

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.predict_forest(
            self.feat, self.thr, self.left, self.right, self.prob, X
        )


@dataclass
class TrainedModel:
    """A fitted classifier restricted to a selected feature subset."""

    kind: str
    model: object
    feature_names: tuple[str, ...]
    selected: tuple[str, ...]
    seed: int
    metadata: dict = field(default_factory=dict)

    def _project(self, X: np.ndarray) -> np.ndarray:
        idx = [self.feature_names.index(f) for f in self.selected]
        return X[:, idx]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probabilities for rows given in full feature order."""
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if not np.isfinite(X).all():
            raise ValueError("non-finite feature values")
        return self.model.predict_proba(self._project(X))


def _make(spec: ClassifierSpec):
    if spec.kind == "naive-bayes":
        m = GaussianNB()
        m.var_floor = spec.var_floor
        return m
    if spec.kind == "logistic-regression":
        return LogisticRegression(spec.l2, spec.max_iter, spec.tol)
    if spec.kind == "decision-tree":
        return DecisionTree(spec.min_leaf)
    return RandomForest(spec.n_trees, spec.min_leaf)


def train(
    d: Dataset,
    spec: ClassifierSpec,
    selected: Sequence[str] | None = None,
) -> TrainedModel:
    """Fit spec's classifier on d, optionally restricted to a feature subset."""
    if d.n_rows == 0 or len(set(d.y.tolist())) < 2:
        raise ValueError("training requires rows of both classes")
    names = tuple(selected) if selected is not None else d.feature_names
    sub = d.select_features(names) if selected is not None else d
    model = _make(spec).fit(sub.X, sub.y, seed=spec.seed)
    return TrainedModel(
        kind=spec.kind,
        model=model,
        feature_names=d.feature_names,
        selected=names,
        seed=spec.seed,
    )


def predict_proba(m: TrainedModel, row: np.ndarray) -> float:
    """Faulty-class probability for a single row in full feature order."""
    return float(m.predict_proba(np.asarray(row, dtype=np.float64))[0])


# --------------------------------------------------------------------------
# Serialization (versioned structured text)
# --------------------------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def model_to_dict(m: TrainedModel) -> dict:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "kind": m.kind,
        "feature_names": list(m.feature_names),
        "selected": list(m.selected),
        "seed": m.seed,
        "metadata": m.metadata,
    }
    mdl = m.model
    if m.kind == "naive-bayes":
        doc["params"] = {
            "prior1": mdl.prior1,
            "mu": mdl.mu.tolist(),
            "var": mdl.var.tolist(),
            "var_floor": mdl.var_floor,
        }
    elif m.kind == "logistic-regression":
        doc["params"] = {
            "l2": mdl.l2, "max_iter": mdl.max_iter, "tol": mdl.tol,
            "mean": mdl.mean.tolist(), "std": mdl.std.tolist(),
            "w": mdl.w.tolist(), "b": mdl.b,
        }
    elif m.kind == "decision-tree":
        feat, thr, left, right, prob = mdl.nodes
        doc["params"] = {
            "min_leaf": mdl.min_leaf,
            "feat": feat.tolist(), "thr": thr.tolist(),
            "left": left.tolist(), "right": right.tolist(),
            "prob": prob.tolist(),
        }
    else:
        doc["params"] = {
            "n_trees": mdl.n_trees, "min_leaf": mdl.min_leaf,
            "feat": mdl.feat.tolist(), "thr": mdl.thr.tolist(),
            "left": mdl.left.tolist(), "right": mdl.right.tolist(),
            "prob": mdl.prob.tolist(), "counts": mdl.counts.tolist(),
            "inbag": mdl.inbag.astype(int).tolist(),
        }
    return doc


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {doc.get('version')}")
    kind = doc["kind"]
    p = doc["params"]
    if kind == "naive-bayes":
        mdl = GaussianNB()
        mdl.prior1 = float(p["prior1"])
        mdl.mu = np.asarray(p["mu"], dtype=np.float64)
        mdl.var = np.asarray(p["var"], dtype=np.float64)
        mdl.var_floor = float(p["var_floor"])
    elif kind == "logistic-regression":
        mdl = LogisticRegression(p["l2"], p["max_iter"], p["tol"])
        mdl.mean = np.asarray(p["mean"], dtype=np.float64)
        mdl.std = np.asarray(p["std"], dtype=np.float64)
        mdl.w = np.asarray(p["w"], dtype=np.float64)
        mdl.b = float(p["b"])
    elif kind == "decision-tree":
        mdl = DecisionTree(p["min_leaf"])
        mdl.nodes = (
            np.asarray(p["feat"], dtype=np.int64),
            np.asarray(p["thr"], dtype=np.float64),
            np.asarray(p["left"], dtype=np.int64),
            np.asarray(p["right"], dtype=np.int64),
            np.asarray(p["prob"], dtype=np.float64),
        )
    elif kind == "random-forest":
        mdl = RandomForest(p["n_trees"], p["min_leaf"])
        mdl.feat = np.asarray(p["feat"], dtype=np.int64)
        mdl.thr = np.asarray(p["thr"], dtype=np.float64)
        mdl.left = np.asarray(p["left"], dtype=np.int64)
        mdl.right = np.asarray(p["right"], dtype=np.int64)
        mdl.prob = np.asarray(p["prob"], dtype=np.float64)
        mdl.counts = np.asarray(p["counts"], dtype=np.int64)
        mdl.inbag = np.asarray(p["inbag"], dtype=bool)
    else:
        raise ValueError(f"unknown classifier kind: {kind}")
    return TrainedModel(
        kind=kind,
        model=mdl,
        feature_names=tuple(doc["feature_names"]),
        selected=tuple(doc["selected"]),
        seed=int(doc["seed"]),
        metadata=dict(doc.get("metadata", {})),
    )
