"""AUC and the imputation x fold evaluation grid."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import learners, streams
from .dataset import FoldAssignment, fit_scaler, stratified_folds
from .errors import ClinselError, ConfigError, UndefinedMetricError
from .impute import ImputedCohort


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(positive outranks negative), ties counted 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    # midranks are half-integers, so the U statistic is exact in floating point
    ranks = rankdata(scores, method="average")
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class RunRecord:
    imputation_index: int
    fold_index: int
    auc: Optional[float]


@dataclass(frozen=True)
class EvaluationResult:
    features: tuple[int, ...]
    family: str
    outcome: str
    runs: tuple[RunRecord, ...]

    @property
    def per_run_auc(self):
        return [(r.imputation_index, r.fold_index, r.auc) for r in self.runs]

    @property
    def run_count(self) -> int:
        return len(self.runs)

    @property
    def excluded_runs(self) -> int:
        return sum(r.auc is None for r in self.runs)

    @property
    def pooled_auc(self) -> float:
        vals = [r.auc for r in self.runs if r.auc is not None]
        if not vals:
            return math.nan
        return math.fsum(vals) / len(vals)

    def to_dict(self, names=None):
        feats = [names[i] for i in self.features] if names is not None else list(self.features)
        return {
            "family": self.family,
            "outcome": self.outcome,
            "features": feats,
            "pooled_auc": self.pooled_auc,
            "run_count": self.run_count,
            "excluded_runs": self.excluded_runs,
            "runs": [
                {"imputation": r.imputation_index, "fold": r.fold_index, "auc": r.auc} for r in self.runs
            ],
        }

    def to_json(self, names=None) -> str:
        return json.dumps(self.to_dict(names), sort_keys=True, indent=2)


class GridError(ClinselError):
    """Wraps a failure inside the grid with its coordinates."""

    def __init__(self, cause, **coords):
        where = ", ".join(f"{k}={v}" for k, v in coords.items())
        super().__init__(f"{cause} [{where}]")
        self.cause = cause
        self.coords = coords
        self.exit_code = getattr(cause, "exit_code", 1)


class FoldCache:
    """Per-imputation stratified folds, drawn once from each completed outcome."""

    def __init__(self, imputed: Sequence[ImputedCohort], outcome: str, k: int, seed: int):
        code = streams.OUTCOME_CODES[outcome]
        self.k = k
        self.folds: list[FoldAssignment] = [
            stratified_folds(imp.outcome(outcome), k, streams.substream(seed, streams.FOLDS, imp.imputation_index, code))
            for imp in imputed
        ]


def _one_run(features, spec, imp, y, folds, f, seed, code):
    test = folds.fold_of == f
    train = ~test
    X = imp.completed_values[:, features]
    binary = [imp.schema[j].is_binary for j in features]
    scaler = fit_scaler(X[train], binary)
    Xtr = scaler.transform(X[train])
    Xte = scaler.transform(X[test])
    ytr = y[train].astype(float)
    yte = y[test]
    if yte.min() == yte.max():
        return RunRecord(imp.imputation_index, f, None)
    rng = streams.substream(seed, streams.FIT, imp.imputation_index, f, code)
    model = learners.fit(spec, Xtr, ytr, rng, feature_subset=features)
    return RunRecord(imp.imputation_index, f, auc(model.score(Xte), yte))


def evaluate_feature_set(
    features: Sequence[int],
    spec: learners.ModelSpec,
    imputed: Sequence[ImputedCohort],
    outcome: str,
    k: int,
    seed: int,
    jobs: int = 1,
    folds: Optional[FoldCache] = None,
) -> EvaluationResult:
    """Fit on k-1 folds and score the held-out fold, for every imputation.

    Standardisation is fit on the training folds only. Each (imputation, fold)
    run draws from its own substream, so results are independent of ``jobs``.
    A held-out fold with a single class is recorded with ``auc=None`` and left
    out of the pooled mean.
    """
    features = tuple(int(i) for i in features)
    if not features:
        raise ConfigError("feature set must be non-empty")
    if outcome not in streams.OUTCOME_CODES:
        raise ConfigError(f"unknown outcome {outcome!r}")
    if folds is None:
        folds = FoldCache(imputed, outcome, k, seed)
    elif folds.k != k:
        raise ConfigError("fold cache was built for a different k")
    code = streams.OUTCOME_CODES[outcome]
    tasks = [(mi, f) for mi in range(len(imputed)) for f in range(k)]

    def run(task):
        mi, f = task
        imp = imputed[mi]
        try:
            return _one_run(features, spec, imp, imp.outcome(outcome), folds.folds[mi], f, seed, code)
        except ClinselError as exc:
            raise GridError(exc, model=spec.family, outcome=outcome,
                            imputation=imp.imputation_index, fold=f) from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(run, tasks))
    else:
        runs = [run(t) for t in tasks]
    return EvaluationResult(features, spec.family, outcome, tuple(runs))
