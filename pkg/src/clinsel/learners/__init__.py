"""Five classifier families behind one fit/score interface.

Every family scores so that a higher value means a more likely positive
outcome, which lets AUC be computed without knowing the family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import ConfigError, FitError, InterfaceError
from .forest import DecisionTreeModel, RandomForestModel
from .knn import KNNModel
from .logistic import LogisticModel
from .svm import LinearSVMModel

FAMILIES = ("logistic_regression", "linear_svm", "knn", "decision_tree", "random_forest")

DEFAULTS: dict[str, dict[str, Any]] = {
    "logistic_regression": {"l2": 1e-4},
    "linear_svm": {"C": 1.0},
    "knn": {"k": 5},
    "decision_tree": {"max_depth": 3, "min_leaf": 5},
    "random_forest": {"n_trees": 100, "max_depth": 8, "min_leaf": 1, "max_features": None, "bootstrap": True},
}

DISPLAY_NAMES = {
    "logistic_regression": "Logistic Regression",
    "linear_svm": "SVM",
    "knn": "KNN",
    "decision_tree": "Decision Tree",
    "random_forest": "Random Forest",
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.family])
        if unknown:
            raise ConfigError(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        hp = {**DEFAULTS[self.family], **self.hyperparameters}
        object.__setattr__(self, "hyperparameters", hp)
        _validate(self.family, hp)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.hyperparameters.items()))))


def _validate(family, hp):
    def positive_int(key):
        v = hp[key]
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{family}: {key} must be an integer >= 1, got {v!r}")

    if family == "logistic_regression" and not hp["l2"] >= 0:
        raise ConfigError("logistic_regression: l2 must be >= 0")
    if family == "linear_svm" and not hp["C"] > 0:
        raise ConfigError("linear_svm: C must be > 0")
    if family == "knn":
        positive_int("k")
    if family in ("decision_tree", "random_forest"):
        positive_int("max_depth")
        positive_int("min_leaf")
    if family == "random_forest":
        positive_int("n_trees")
        if hp["max_features"] is not None:
            positive_int("max_features")


class TrainedScorer:
    """A fitted model bound to the ordered feature subset it was trained on."""

    def __init__(self, family: str, model, feature_subset: Sequence[int]):
        self.family = family
        self.model = model
        self.feature_subset = tuple(int(i) for i in feature_subset)

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_subset):
            raise InterfaceError(
                f"{self.family}: expected {len(self.feature_subset)} columns, got shape {X.shape}"
            )
        return np.asarray(self.model.score(X), dtype=float)

    def __repr__(self):
        return f"TrainedScorer({self.family}, features={list(self.feature_subset)})"


def fit(spec: ModelSpec, X, y, rng: Optional[np.random.Generator] = None,
        feature_subset: Optional[Sequence[int]] = None) -> TrainedScorer:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise FitError(f"{spec.family}: X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise FitError(f"{spec.family}: non-finite input")
    if not np.all((y == 0) | (y == 1)):
        raise FitError(f"{spec.family}: labels must be 0/1")
    if y.min() == y.max():
        raise FitError(f"{spec.family}: training labels contain a single class")
    hp = spec.hyperparameters
    fam = spec.family
    if fam == "logistic_regression":
        model = LogisticModel.fit(X, y, lam=hp["l2"])
    elif fam == "linear_svm":
        model = LinearSVMModel.fit(X, y, C=hp["C"])
    elif fam == "knn":
        model = KNNModel.fit(X, y, k=hp["k"])
    elif fam == "decision_tree":
        model = DecisionTreeModel.fit(X, y, max_depth=hp["max_depth"], min_leaf=hp["min_leaf"])
    else:
        if rng is None:
            raise FitError("random_forest needs an rng")
        model = RandomForestModel.fit(
            X, y, rng, n_trees=hp["n_trees"], max_depth=hp["max_depth"], min_leaf=hp["min_leaf"],
            max_features=hp["max_features"], bootstrap=hp["bootstrap"],
        )
    subset = range(X.shape[1]) if feature_subset is None else feature_subset
    if len(subset) != X.shape[1]:
        raise InterfaceError("feature_subset length does not match X")
    return TrainedScorer(fam, model, subset)


def score(model: TrainedScorer, X) -> np.ndarray:
    return model.score(X)


__all__ = [
    "FAMILIES", "DEFAULTS", "DISPLAY_NAMES", "ModelSpec", "TrainedScorer", "fit", "score",
    "LogisticModel", "LinearSVMModel", "KNNModel", "DecisionTreeModel", "RandomForestModel",
]
