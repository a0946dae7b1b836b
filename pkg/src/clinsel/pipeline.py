"""End-to-end protocol and report emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, learners
from .config import PipelineConfig
from .dataset import Cohort, load_csv
from .errors import ReportIOError
from .impute import ImputedCohort, impute_many
from .interpret import ThresholdReport, aggregate_cutpoints, extract_thresholds, threshold_report
from .learners.forest import DecisionTreeModel
from .select import SelectionTrace, forward_select
from .synthgen import generate

log = logging.getLogger(__name__)

TREE_FAMILY = "decision_tree"
REPORT_FILES = (
    "results_response.csv", "results_remission.csv", "thresholds.csv",
    "selection_trace.json", "evaluation_runs.json", "scatter.csv", "trees.json", "provenance.json",
)


@dataclass
class RunReport:
    config: PipelineConfig
    traces: dict[tuple[str, str], SelectionTrace]
    threshold_reports: list[ThresholdReport]
    cutpoint_frequencies: dict[str, list[tuple[int, float]]]
    trees: dict[str, dict]
    scatter: list[dict]
    feature_names: list[str]
    provenance: dict = field(default_factory=dict)
    imputed: Optional[list[ImputedCohort]] = None


def load_cohort(config: PipelineConfig) -> Cohort:
    if config.generator is not None:
        return generate(config.generator)
    return load_csv(config.input_path, config.schema, na_token=config.na_token)


def _integer_valued(cohort: Cohort, j: int) -> bool:
    feat = cohort.schema[j]
    if feat.kind not in ("ordinal", "binary"):
        return False
    obs = cohort.values[~cohort.missing[:, j], j]
    return bool(np.all(obs == np.round(obs)))


def tree_features(config: PipelineConfig, traces, outcome: str) -> list[int]:
    """Features for the threshold trees: the tree family's selection, else the report feature alone."""
    trace = traces.get((TREE_FAMILY, outcome))
    if trace is not None and trace.selected:
        return trace.selected
    return [config.schema.index(config.tree_report_feature)]


def interpret_outcome(config, cohort, imputed, features, outcome):
    """Refit a tree per imputation on raw completed values, aggregate cutpoints, build Table 2 rows."""
    names = cohort.schema.names
    report_j = config.schema.index(config.tree_report_feature)
    integer = _integer_valued(cohort, report_j)
    spec = learners.ModelSpec(TREE_FAMILY)
    hp = spec.hyperparameters
    local = features.index(report_j) if report_j in features else None
    tree_dicts = []
    per_tree_int = []
    raw_cuts = []
    for imp in imputed:
        X = imp.completed_values[:, features]
        y = imp.outcome(outcome).astype(float)
        if y.min() == y.max():
            continue
        model = DecisionTreeModel.fit(X, y, max_depth=hp["max_depth"], min_leaf=hp["min_leaf"])
        tree_dicts.append({"imputation": imp.imputation_index,
                           "tree": model.tree.to_dict([names[j] for j in features])})
        cuts = extract_thresholds(model.tree, local, integer_valued=True) if local is not None else []
        per_tree_int.append([c.integer for c in cuts])
        raw_cuts.extend(c.value for c in cuts)

    agg = aggregate_cutpoints(per_tree_int)
    reports = []
    values = cohort.values[:, report_j]
    observed_outcome = cohort.outcome(outcome)
    for v, freq in agg:
        if integer:
            cut, icut = v + 0.5, v
        else:
            near = [c for c in raw_cuts if abs(math.floor(c) - v) <= 1]
            cut, icut = float(np.median(near)), None
        for direction in ("<=", ">"):
            reports.append(threshold_report(values, observed_outcome, config.tree_report_feature, cut,
                                            direction, outcome, integer_cut=icut, frequency=freq))
    trees = {"features": [names[j] for j in features], "trees": tree_dicts}
    return reports, agg, trees


def scatter_rows(cohort: Cohort, feature: str) -> list[dict]:
    x = cohort.column(feature)
    rows = []
    for i in range(cohort.n_patients):
        rows.append({
            "patient": i,
            feature: _cell(x[i]),
            "ybocs_baseline": _cell(cohort.ybocs_baseline[i]),
            "response": _cell(cohort.response[i], as_int=True),
            "remission": _cell(cohort.remission[i], as_int=True),
        })
    return rows


def _cell(v, as_int=False):
    if v is None or (isinstance(v, float) and math.isnan(v)) or (isinstance(v, np.floating) and np.isnan(v)):
        return ""
    v = float(v)
    if as_int or v.is_integer():
        return int(v)
    return v


def run_pipeline(config: PipelineConfig, keep_imputations: bool = False) -> RunReport:
    config.validate()
    cohort = load_cohort(config)
    log.info("cohort: %d patients, %d features", cohort.n_patients, len(cohort.schema))
    imputed = impute_many(cohort, config.m_imputations, config.seed,
                          n_sweeps=config.imputation_sweeps, jobs=config.jobs)
    candidates = list(range(len(cohort.schema)))
    traces: dict[tuple[str, str], SelectionTrace] = {}
    for outcome in config.outcomes:
        for family in config.models:
            log.info("selecting: %s / %s", family, outcome)
            traces[(family, outcome)] = forward_select(candidates, learners.ModelSpec(family), imputed,
                                                       outcome, config)

    reports: list[ThresholdReport] = []
    freqs = {}
    trees = {}
    for outcome in config.outcomes:
        feats = tree_features(config, traces, outcome)
        r, agg, t = interpret_outcome(config, cohort, imputed, feats, outcome)
        reports.extend(r)
        freqs[outcome] = agg
        trees[outcome] = t

    provenance = {"config": config.echo(), "seed": config.seed, "version": __version__,
                  "n_patients": cohort.n_patients}
    return RunReport(config, traces, reports, freqs, trees,
                     scatter_rows(cohort, config.tree_report_feature), cohort.schema.names, provenance,
                     imputed if keep_imputations or config.dump_imputations else None)


# --- emission -----------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in header})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return v


def _json_text(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def results_rows(report: RunReport, outcome: str) -> list[dict]:
    rows = []
    names = report.feature_names
    for family in report.config.models:
        tr = report.traces[(family, outcome)]
        res = tr.final_result
        rows.append({
            "model": learners.DISPLAY_NAMES[family],
            "family": family,
            "auc": tr.pooled_auc,
            "selected_features": ";".join(names[i] for i in tr.selected),
            "n_selected": len(tr.selected),
            "run_count": res.run_count if res is not None else 0,
            "excluded_runs": res.excluded_runs if res is not None else 0,
        })
    return rows


RESULTS_HEADER = ["model", "family", "auc", "selected_features", "n_selected", "run_count", "excluded_runs"]
THRESHOLD_HEADER = ["feature", "threshold", "direction", "cutpoint", "integer_cut", "outcome", "frequency",
                    "exposed_pos", "exposed_neg", "unexposed_pos", "unexposed_neg", "degenerate",
                    "odds_ratio", "p_value", "correction_applied"]


def render_report(report: RunReport) -> dict[str, str]:
    """File name -> contents. Pure; the same report always renders to the same bytes."""
    names = report.feature_names
    files = {}
    for outcome in report.config.outcomes:
        files[f"results_{outcome}.csv"] = _csv_text(RESULTS_HEADER, results_rows(report, outcome))
    files["thresholds.csv"] = _csv_text(THRESHOLD_HEADER, [r.as_row() for r in report.threshold_reports])
    files["selection_trace.json"] = _json_text(
        [report.traces[(f, o)].to_dict(names) for o in report.config.outcomes for f in report.config.models]
    )
    evals = []
    for o in report.config.outcomes:
        for f in report.config.models:
            res = report.traces[(f, o)].final_result
            if res is not None:
                evals.append(res.to_dict(names))
    files["evaluation_runs.json"] = _json_text(evals)
    feat = report.config.tree_report_feature
    files["scatter.csv"] = _csv_text(["patient", feat, "ybocs_baseline", "response", "remission"], report.scatter)
    files["trees.json"] = _json_text({
        o: {**report.trees[o], "cutpoint_frequencies": [{"integer_cut": v, "frequency": q}
                                                       for v, q in report.cutpoint_frequencies[o]]}
        for o in report.config.outcomes
    })
    files["provenance.json"] = _json_text(report.provenance)
    if report.config.dump_imputations and report.imputed is not None:
        for imp in report.imputed:
            files[f"imputations/imputation_{imp.imputation_index:03d}.csv"] = _imputation_csv(imp)
    return files


def _imputation_csv(imp: ImputedCohort) -> str:
    header = imp.schema.names + ["ybocs_baseline", "ybocs_final", "response", "remission"]
    grid = np.column_stack([imp.completed_values, imp.completed_baseline, imp.completed_final,
                            imp.response.astype(float), imp.remission.astype(float)])
    rows = [dict(zip(header, (_cell(v) for v in row))) for row in grid]
    return _csv_text(header, rows)


def emit_report(report: RunReport, output_dir) -> dict[str, str]:
    """Write every report file plus manifest.json (name -> sha256). Returns the manifest."""
    out = Path(output_dir)
    files = render_report(report)
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest = {}
        for name in sorted(files):
            data = files[name].encode("utf-8")
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            manifest[name] = hashlib.sha256(data).hexdigest()
        (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write reports to {out}: {exc}") from exc
    return manifest
