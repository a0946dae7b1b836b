"""Greedy forward feature selection under a minimum pooled-AUC gain."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .errors import ConfigError
from .evaluate import EvaluationResult, FoldCache, evaluate_feature_set

BASELINE_AUC = 0.5


@dataclass(frozen=True)
class SelectionStep:
    feature: int
    pooled_auc_after: float


@dataclass
class SelectionTrace:
    family: str
    outcome: str
    gate: float
    baseline_auc: float = BASELINE_AUC
    steps: list[SelectionStep] = field(default_factory=list)
    # every round's candidate scores, in evaluation order: [(feature, pooled_auc), ...]
    rounds: list[list[tuple[int, float]]] = field(default_factory=list)
    rejected_at_final_step: list[tuple[int, float]] = field(default_factory=list)
    final_result: Optional[EvaluationResult] = None

    @property
    def selected(self) -> list[int]:
        return [s.feature for s in self.steps]

    @property
    def pooled_auc(self) -> float:
        return self.steps[-1].pooled_auc_after if self.steps else math.nan

    def gate_holds(self) -> bool:
        prev = self.baseline_auc
        for s in self.steps:
            if not s.pooled_auc_after >= prev + self.gate:
                return False
            prev = s.pooled_auc_after
        return len(set(self.selected)) == len(self.steps)

    def to_dict(self, names=None):
        def nm(i):
            return names[i] if names is not None else i

        return {
            "family": self.family,
            "outcome": self.outcome,
            "gate": self.gate,
            "baseline_auc": self.baseline_auc,
            "steps": [{"feature": nm(s.feature), "pooled_auc_after": s.pooled_auc_after} for s in self.steps],
            "rounds": [
                [{"feature": nm(f), "pooled_auc": _json_float(a)} for f, a in rnd] for rnd in self.rounds
            ],
            "rejected_at_final_step": [
                {"feature": nm(f), "best_auc_achieved": _json_float(a)} for f, a in self.rejected_at_final_step
            ],
        }

    def to_json(self, names=None) -> str:
        return json.dumps(self.to_dict(names), sort_keys=True, indent=2)


def _json_float(x):
    return None if math.isnan(x) else x


Evaluator = Callable[[Sequence[int]], EvaluationResult]


def forward_select(candidates, spec, imputed, outcome, config, evaluator: Optional[Evaluator] = None) -> SelectionTrace:
    """Add the best remaining candidate while it lifts pooled AUC by at least ``config.auc_gate``.

    The first feature is measured against chance (0.5). Ties go to the lower
    feature index. ``evaluator`` maps a feature tuple to an EvaluationResult;
    by default it runs the full imputation x fold grid.
    """
    candidates = sorted(int(c) for c in candidates)
    if not candidates:
        raise ConfigError("forward selection needs at least one candidate")
    if len(set(candidates)) != len(candidates):
        raise ConfigError("duplicate candidate features")
    if config.auc_gate < 0:
        raise ConfigError("auc_gate must be >= 0")

    if evaluator is None:
        folds = FoldCache(imputed, outcome, config.k_folds, config.seed)

        def evaluator(feats):
            return evaluate_feature_set(feats, spec, imputed, outcome, config.k_folds, config.seed,
                                        jobs=getattr(config, "jobs", 1), folds=folds)

    trace = SelectionTrace(spec.family, outcome, float(config.auc_gate))
    current: list[int] = []
    prev = trace.baseline_auc
    remaining = list(candidates)
    while remaining:
        scored = []
        best_feat, best_auc, best_res = None, -math.inf, None
        for c in remaining:
            res = evaluator(tuple(current + [c]))
            a = res.pooled_auc
            scored.append((c, a))
            if not math.isnan(a) and a > best_auc:
                best_feat, best_auc, best_res = c, a, res
        trace.rounds.append(scored)
        if best_feat is None or not best_auc >= prev + trace.gate:
            trace.rejected_at_final_step = scored
            break
        current.append(best_feat)
        remaining.remove(best_feat)
        trace.steps.append(SelectionStep(best_feat, best_auc))
        trace.final_result = best_res
        prev = best_auc
    return trace
