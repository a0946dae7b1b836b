"""Cohort schema, CSV ingestion, outcome derivation, scaling and fold assignment."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataValidationError, ParseError, SchemaError

log = logging.getLogger(__name__)

KINDS = ("continuous", "binary", "ordinal")

SCORE_COLUMNS = ("ybocs_baseline", "ybocs_final")
YBOCS_BOUNDS = (0.0, 48.0)

RESPONSE_REDUCTION = 0.30
REMISSION_CUTOFF = 16.0
# slack on the reduction ratio so that e.g. 40 -> 28 counts as exactly 30%
RATIO_EPS = 1e-12


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = "continuous"
    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "binary" and self.bounds is None:
            object.__setattr__(self, "bounds", (0.0, 1.0))
        if self.bounds is not None:
            lo, hi = (float(b) for b in self.bounds)
            if not lo < hi:
                raise SchemaError(f"feature {self.name!r}: bounds need lower < upper, got {self.bounds}")
            object.__setattr__(self, "bounds", (lo, hi))

    @property
    def is_binary(self) -> bool:
        return self.kind == "binary"

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("binary", "ordinal")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate feature names: {', '.join(dupes)}")
        clash = set(names) & set(SCORE_COLUMNS)
        if clash:
            raise SchemaError(f"feature names collide with score columns: {sorted(clash)}")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"feature {name!r} not in schema") from None

    def __len__(self):
        return len(self.features)

    def __getitem__(self, i):
        return self.features[i]


DEFAULT_EXTRA_FEATURE = Feature("aux_predictor", "continuous")


def default_schema(extra: Optional[Feature] = DEFAULT_EXTRA_FEATURE) -> FeatureSchema:
    """The 16 named candidate predictors plus one configurable slot."""
    feats = [
        Feature("age", "continuous", (18.0, 90.0)),
        Feature("gender_identity", "binary"),
        Feature("sexual_minority", "binary"),
        Feature("race_ethnicity", "binary"),
        Feature("postgrad_education", "binary"),
        Feature("bdd_ybocs_baseline", "continuous", YBOCS_BOUNDS),
        Feature("urica", "continuous"),
        Feature("babs_tot_recalc", "ordinal", (0.0, 24.0)),
        Feature("qids", "ordinal", (0.0, 27.0)),
        Feature("credibility", "ordinal", (3.0, 27.0)),
        Feature("expectancy", "ordinal", (3.0, 27.0)),
        Feature("bdd_duration", "continuous", (0.0, 80.0)),
        Feature("treatment_group", "binary"),
        Feature("ssri_use", "binary"),
        Feature("any_comorbidity", "binary"),
        Feature("covid_impact", "ordinal", (1.0, 5.0)),
    ]
    if extra is not None:
        feats.append(extra)
    return FeatureSchema(tuple(feats))


@dataclass(frozen=True, eq=False)
class Cohort:
    """Patient x feature grid with an explicit missingness mask.

    Outcome arrays are float with 1.0 / 0.0 and NaN for missing. Score arrays
    use NaN for missing. ``values`` holds NaN wherever ``missing`` is set.
    """

    schema: FeatureSchema
    values: np.ndarray
    missing: np.ndarray
    ybocs_baseline: np.ndarray
    ybocs_final: np.ndarray
    response: np.ndarray
    remission: np.ndarray
    degenerate: tuple[int, ...] = field(default=())

    @property
    def n_patients(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    def outcome(self, name: str) -> np.ndarray:
        if name not in ("response", "remission"):
            raise ConfigError(f"unknown outcome {name!r}")
        return getattr(self, name)


def make_cohort(schema, values, ybocs_baseline, ybocs_final, missing=None) -> Cohort:
    """Build a validated cohort from raw arrays (NaN marks missing) and derive outcomes."""
    values = np.array(values, dtype=float).reshape(-1, len(schema))
    if missing is None:
        missing = np.isnan(values)
    missing = np.asarray(missing, dtype=bool)
    values = np.where(missing, np.nan, values)
    n = values.shape[0]
    baseline = np.array(ybocs_baseline, dtype=float).reshape(n)
    final = np.array(ybocs_final, dtype=float).reshape(n)
    _check_bounds(schema, values, missing, baseline, final)
    for arr in (values, missing, baseline, final):
        arr.setflags(write=False)
    nan = np.full(n, np.nan)
    cohort = Cohort(schema, values, missing, baseline, final, nan, nan.copy())
    return derive_outcomes(cohort)


def _check_bounds(schema, values, missing, baseline, final):
    for j, feat in enumerate(schema.features):
        col = values[~missing[:, j], j]
        if not np.all(np.isfinite(col)):
            raise DataValidationError(f"non-finite observed value in {feat.name!r}")
        if feat.bounds is None:
            continue
        lo, hi = feat.bounds
        bad = np.flatnonzero((col < lo) | (col > hi))
        if bad.size:
            raise DataValidationError(
                f"{feat.name!r} value {col[bad[0]]:g} outside bounds [{lo:g}, {hi:g}]"
            )
    lo, hi = YBOCS_BOUNDS
    for name, arr in zip(SCORE_COLUMNS, (baseline, final)):
        obs = arr[~np.isnan(arr)]
        if np.any(np.isinf(obs)):
            raise DataValidationError(f"non-finite value in {name!r}")
        if np.any((obs < lo) | (obs > hi)):
            raise DataValidationError(f"{name!r} outside instrument range [{lo:g}, {hi:g}]")


def load_csv(path, schema: FeatureSchema, na_token: str = "NA") -> Cohort:
    """Read a cohort CSV. Empty cells and ``na_token`` are missing; extra columns are ignored."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read input {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: no header row") from None
        wanted = schema.names + list(SCORE_COLUMNS)
        for name in wanted:
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}")
        pos = [header.index(name) for name in wanted]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}", row=lineno)
            parsed = []
            for name, p in zip(wanted, pos):
                cell = row[p].strip()
                if cell == "" or cell == na_token:
                    parsed.append(math.nan)
                    continue
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: column {name!r}: cannot parse {cell!r}", row=lineno, column=name
                    ) from None
                if math.isnan(val):
                    raise ParseError(f"{path}:{lineno}: column {name!r}: literal NaN", row=lineno, column=name)
                parsed.append(val)
            rows.append(parsed)
    p = len(schema)
    grid = np.array(rows, dtype=float).reshape(-1, p + 2)
    return make_cohort(schema, grid[:, :p], grid[:, p], grid[:, p + 1])


def write_csv(cohort: Cohort, path, na_token: str = "NA") -> None:
    names = cohort.schema.names + list(SCORE_COLUMNS)
    grid = np.column_stack([cohort.values, cohort.ybocs_baseline, cohort.ybocs_final])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in grid:
            w.writerow([na_token if np.isnan(v) else _fmt(v) for v in row])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def is_response(baseline, final):
    """Vectorised response rule; callers guarantee baseline > 0."""
    return (baseline - final) / baseline >= RESPONSE_REDUCTION - RATIO_EPS


def outcome_arrays(baseline: np.ndarray, final: np.ndarray):
    """Return (response, remission, degenerate_indices) with NaN where undefined."""
    baseline = np.asarray(baseline, dtype=float)
    final = np.asarray(final, dtype=float)
    n = baseline.shape[0]
    response = np.full(n, np.nan)
    remission = np.full(n, np.nan)
    has_final = ~np.isnan(final)
    remission[has_final] = (final[has_final] <= REMISSION_CUTOFF).astype(float)
    both = has_final & ~np.isnan(baseline)
    degenerate = both & (baseline <= 0)
    ok = both & ~degenerate
    response[ok] = is_response(baseline[ok], final[ok]).astype(float)
    # a zero baseline makes the percent reduction undefined, so both outcomes go missing
    remission[degenerate] = np.nan
    return response, remission, tuple(int(i) for i in np.flatnonzero(degenerate))


def derive_outcomes(cohort: Cohort) -> Cohort:
    response, remission, degenerate = outcome_arrays(cohort.ybocs_baseline, cohort.ybocs_final)
    for i in degenerate:
        log.warning("patient %d: baseline score is 0, outcomes set missing", i)
    response.setflags(write=False)
    remission.setflags(write=False)
    return replace(cohort, response=response, remission=remission, degenerate=degenerate)


@dataclass(frozen=True)
class Scaler:
    location: np.ndarray
    scale: np.ndarray
    warnings: tuple[str, ...] = ()

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.location) / self.scale


def fit_scaler(X, binary_mask, names=None) -> Scaler:
    """Population-SD scaler. Binary and zero-variance columns pass through."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    loc = np.zeros(p)
    scale = np.ones(p)
    warnings = []
    for j in range(p):
        if binary_mask[j]:
            continue
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size < 2:
            raise DataValidationError(f"column {j}: need at least 2 observed training values to standardize")
        mu = col.mean()
        sd = col.std()
        if sd <= 1e-12 * max(1.0, abs(mu)):
            label = names[j] if names is not None else str(j)
            warnings.append(f"{label}: zero training variance, left unscaled")
            continue
        loc[j] = mu
        scale[j] = sd
    return Scaler(loc, scale, tuple(warnings))


def standardize(train: Cohort, apply_to: Cohort):
    """Fit location/scale on ``train`` and apply it to ``apply_to``.

    Missing cells stay NaN in the output.
    """
    binary = [f.is_binary for f in train.schema.features]
    scaler = fit_scaler(train.values, binary, train.schema.names)
    for w in scaler.warnings:
        log.warning(w)
    return scaler.transform(apply_to.values), scaler


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def test_mask(self, f):
        return self.fold_of == f

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.k)


def stratified_folds(outcome: Sequence, k: int, rng: np.random.Generator) -> FoldAssignment:
    """Shuffle each class and deal it round-robin across folds.

    Negatives continue dealing from where the positives stopped, which keeps
    total fold sizes within one patient of each other.
    """
    y = np.asarray(outcome)
    if k < 2:
        raise ConfigError(f"k_folds must be >= 2, got {k}")
    if np.any(np.isnan(y.astype(float))):
        raise ConfigError("stratified folds need a fully observed outcome")
    y = y.astype(bool)
    pos = np.flatnonzero(y)
    neg = np.flatnonzero(~y)
    if pos.size < k or neg.size < k:
        raise ConfigError(
            f"each outcome class needs at least k={k} members (got {pos.size} positive, {neg.size} negative)"
        )
    fold_of = np.empty(y.size, dtype=np.int64)
    pos = rng.permutation(pos)
    neg = rng.permutation(neg)
    fold_of[pos] = np.arange(pos.size) % k
    fold_of[neg] = (np.arange(neg.size) + pos.size) % k
    return FoldAssignment(fold_of, k)
