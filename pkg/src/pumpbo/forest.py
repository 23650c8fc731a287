"""Random-forest surrogates: regression on cost, classification on feasibility.

The regressor returns a mean and a spread per point. The spread is the
population standard deviation of the per-tree predictions, so a single-tree
forest reports zero spread and full agreement between trees does too. The
feasibility model returns the fraction of trees voting feasible.

Infeasible observations never enter the regression dataset (the objective is
undefined there); they do carry the labels the classifier learns from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _trees


class ModelUnavailableError(RuntimeError):
    """Too little usable data to fit; callers fall back to cheap proposals."""


@dataclass(eq=False)
class Observation:
    """One evaluated control vector; y is defined only when feasible."""

    x: np.ndarray
    feasible: bool
    y: float | None = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.feasible and self.y is None:
            raise ValueError("feasible observation needs an objective value")
        if not self.feasible and self.y is not None:
            raise ValueError("infeasible observation cannot carry an objective value")


@dataclass(frozen=True)
class ForestHyper:
    """Forest settings; max_features defaults to ceil(d / 3) at fit time."""

    n_trees: int = 300
    max_features: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("need at least one tree")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1 when given")

    def mtry(self, d: int) -> int:
        if self.max_features is None:
            return min(d, math.ceil(d / 3))
        return min(d, self.max_features)


@dataclass(frozen=True)
class Prediction:
    mu: float
    sigma: float


@dataclass(eq=False)
class ForestModel:
    """Fitted regression forest (packed node arrays, one row per tree)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray
    hyper: ForestHyper
    seed: int
    d: int
    kind: str = field(default="regressor")

    def predict_per_tree(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        return _trees.predict_trees(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def predict_batch(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        per_tree = self.predict_per_tree(X)
        # center on one tree before averaging: when all trees agree the mean
        # is exactly the common value and the spread is exactly zero
        anchor = per_tree[0]
        centered = per_tree - anchor
        mu = anchor + centered.mean(axis=0)
        sigma = centered.std(axis=0)
        return mu, sigma


@dataclass(eq=False)
class FeasibilityModel:
    """Fitted classification forest, or a constant when one class is absent."""

    forest: ForestModel | None
    constant_p: float | None = None

    def prob_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.forest is None:
            return np.full(X.shape[0], self.constant_p, dtype=np.float64)
        return self.forest.predict_per_tree(X).mean(axis=0)


def _as_xy(data: Sequence[Observation], want_y: bool) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray([obs.x for obs in data], dtype=np.float64)
    if want_y:
        y = np.asarray([obs.y for obs in data], dtype=np.float64)
    else:
        y = np.asarray([1.0 if obs.feasible else 0.0 for obs in data], dtype=np.float64)
    return X, y


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # row-lexicographic sort so fits are bit-identical under any permutation
    # of the training set (accumulation order is part of the result)
    return np.lexsort((y,) + tuple(X[:, i] for i in reversed(range(X.shape[1]))))


def fit_regressor_xy(X: np.ndarray, y: np.ndarray, hyper: ForestHyper, seed: int) -> ForestModel:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if X.shape[0] < 2 or np.unique(X, axis=0).shape[0] < 2:
        raise ModelUnavailableError("regression needs at least two distinct points")
    order = _canonical_order(X, y)
    X = np.ascontiguousarray(X[order])
    y = np.ascontiguousarray(y[order])
    arrays = _trees.fit_forest(
        X,
        y,
        hyper.n_trees,
        hyper.mtry(X.shape[1]),
        hyper.min_leaf,
        hyper.bootstrap,
        False,
        np.uint64(seed % 2**64),
    )
    return ForestModel(*arrays, hyper=hyper, seed=seed, d=X.shape[1], kind="regressor")


def fit_regressor(data: Sequence[Observation], hyper: ForestHyper, seed: int) -> ForestModel:
    """Fit the cost surrogate on feasible observations only."""
    feasible = [obs for obs in data if obs.feasible]
    if len(feasible) < 2:
        raise ModelUnavailableError("regression needs at least two feasible observations")
    X, y = _as_xy(feasible, want_y=True)
    return fit_regressor_xy(X, y, hyper, seed)


def predict(model: ForestModel, x: np.ndarray) -> Prediction:
    mu, sigma = model.predict_batch(np.atleast_2d(x))
    return Prediction(float(mu[0]), float(sigma[0]))


def fit_classifier_xy(
    X: np.ndarray, labels: np.ndarray, hyper: ForestHyper, seed: int
) -> FeasibilityModel:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a feasibility model on an empty dataset")
    if np.all(labels == labels[0]):
        return FeasibilityModel(forest=None, constant_p=float(labels[0]))
    order = _canonical_order(X, labels)
    X = np.ascontiguousarray(X[order])
    labels = np.ascontiguousarray(labels[order])
    arrays = _trees.fit_forest(
        X,
        labels,
        hyper.n_trees,
        hyper.mtry(X.shape[1]),
        hyper.min_leaf,
        hyper.bootstrap,
        True,
        np.uint64(seed % 2**64),
    )
    forest = ForestModel(*arrays, hyper=hyper, seed=seed, d=X.shape[1], kind="classifier")
    return FeasibilityModel(forest=forest)


def fit_classifier(data: Sequence[Observation], hyper: ForestHyper, seed: int) -> FeasibilityModel:
    """Fit the feasibility-probability model on all observations' labels."""
    if not data:
        raise ValueError("cannot fit a feasibility model on an empty dataset")
    X, labels = _as_xy(data, want_y=False)
    return fit_classifier_xy(X, labels, hyper, seed)


def feasibility_prob(model: FeasibilityModel, x: np.ndarray) -> float:
    return float(model.prob_batch(np.atleast_2d(x))[0])


MODEL_DUMP_VERSION = 1


def dump_model(model: ForestModel, path) -> None:
    """Debug dump of the packed tree arrays (format not stability-guaranteed)."""
    trees = []
    for t in range(model.feature.shape[0]):
        n = int(model.n_nodes[t])
        trees.append(
            {
                "feature": model.feature[t, :n].tolist(),
                "threshold": model.threshold[t, :n].tolist(),
                "left": model.left[t, :n].tolist(),
                "right": model.right[t, :n].tolist(),
                "value": model.value[t, :n].tolist(),
            }
        )
    doc = {
        "format_version": MODEL_DUMP_VERSION,
        "kind": model.kind,
        "d": model.d,
        "seed": model.seed,
        "hyper": {
            "n_trees": model.hyper.n_trees,
            "max_features": model.hyper.max_features,
            "min_leaf": model.hyper.min_leaf,
            "bootstrap": model.hyper.bootstrap,
        },
        "trees": trees,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_DUMP_VERSION:
        raise ValueError(f"unsupported model dump version {doc.get('format_version')}")
    trees = doc["trees"]
    n_trees = len(trees)
    cap = max(len(t["feature"]) for t in trees)
    feature = np.full((n_trees, cap), -1, dtype=np.int32)
    threshold = np.zeros((n_trees, cap), dtype=np.float64)
    left = np.full((n_trees, cap), -1, dtype=np.int32)
    right = np.full((n_trees, cap), -1, dtype=np.int32)
    value = np.zeros((n_trees, cap), dtype=np.float64)
    n_nodes = np.zeros(n_trees, dtype=np.int32)
    for t, tree in enumerate(trees):
        n = len(tree["feature"])
        n_nodes[t] = n
        feature[t, :n] = tree["feature"]
        threshold[t, :n] = tree["threshold"]
        left[t, :n] = tree["left"]
        right[t, :n] = tree["right"]
        value[t, :n] = tree["value"]
    hyper = ForestHyper(**doc["hyper"])
    return ForestModel(
        feature, threshold, left, right, value, n_nodes,
        hyper=hyper, seed=doc["seed"], d=doc["d"], kind=doc["kind"],
    )
