import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clinsel.dataset import (Feature, FeatureSchema, default_schema, fit_scaler, is_response, load_csv,
                             make_cohort, outcome_arrays, standardize, stratified_folds, write_csv)
from clinsel.errors import ConfigError, DataValidationError, ParseError, SchemaError

from helpers import small_schema


def header(schema):
    return ",".join(schema.names + ["ybocs_baseline", "ybocs_final"])


def row(schema, **cells):
    vals = []
    for f in schema.features:
        default = int(sum(f.bounds) // 2) if f.bounds else 1
        vals.append(cells.get(f.name, default))
    vals += [cells.get("ybocs_baseline", 40), cells.get("ybocs_final", 20)]
    return ",".join(str(v) for v in vals)


def test_default_schema_has_17_features(schema):
    assert len(schema) == 17
    assert schema.names[-1] == "aux_predictor"
    assert schema[schema.index("credibility")].bounds == (3.0, 27.0)


def test_schema_rejects_duplicates_and_score_names():
    with pytest.raises(SchemaError):
        FeatureSchema((Feature("a"), Feature("a")))
    with pytest.raises(SchemaError):
        FeatureSchema((Feature("ybocs_final"),))


def test_empty_file_gives_empty_cohort(tmp_path, schema):
    p = tmp_path / "c.csv"
    p.write_text(header(schema) + "\n")
    cohort = load_csv(p, schema)
    assert cohort.n_patients == 0


def test_empty_cell_is_missing(tmp_path, schema):
    p = tmp_path / "c.csv"
    line = row(schema, ybocs_baseline=40, ybocs_final=20, credibility="")
    p.write_text(header(schema) + "\n" + line + "\n")
    cohort = load_csv(p, schema)
    j = schema.index("credibility")
    assert cohort.missing[0, j]
    assert np.isnan(cohort.values[0, j])
    assert cohort.missing.sum() == 1


def test_na_token_is_missing(tmp_path, schema):
    p = tmp_path / "c.csv"
    line = row(schema, ybocs_baseline=40, ybocs_final="NA")
    p.write_text(header(schema) + "\n" + line + "\n")
    cohort = load_csv(p, schema)
    assert np.isnan(cohort.response[0]) and np.isnan(cohort.remission[0])


def test_out_of_bounds_credibility_rejected(tmp_path, schema):
    p = tmp_path / "c.csv"
    p.write_text(header(schema) + "\n" + row(schema, ybocs_baseline=40, ybocs_final=20, credibility=28) + "\n")
    with pytest.raises(DataValidationError):
        load_csv(p, schema)


def test_missing_column_named(tmp_path, schema):
    p = tmp_path / "c.csv"
    p.write_text(header(schema).replace("qids,", "") + "\n")
    with pytest.raises(SchemaError, match="qids"):
        load_csv(p, schema)


def test_parse_error_has_row_and_column(tmp_path, schema):
    p = tmp_path / "c.csv"
    p.write_text(header(schema) + "\n" + row(schema, ybocs_baseline=40, ybocs_final=20, urica="abc") + "\n")
    with pytest.raises(ParseError) as err:
        load_csv(p, schema)
    assert err.value.row == 2 and err.value.column == "urica"


def test_csv_round_trip(tmp_path):
    schema = small_schema(Feature("x"), Feature("g", "binary"))
    cohort = make_cohort(schema, [[1.5, 0], [np.nan, 1]], [40, 30], [28, np.nan])
    p = tmp_path / "c.csv"
    write_csv(cohort, p)
    back = load_csv(p, schema)
    assert np.array_equal(back.missing, cohort.missing)
    assert np.array_equal(back.values, cohort.values, equal_nan=True)
    assert np.array_equal(back.ybocs_final, cohort.ybocs_final, equal_nan=True)


@pytest.mark.parametrize("baseline, final, response", [(40, 28, True), (40, 29, False), (10, 7, True)])
def test_response_boundary(baseline, final, response):
    assert bool(is_response(np.float64(baseline), np.float64(final))) is response


def test_remission_inclusive():
    resp, rem, _ = outcome_arrays(np.array([30.0, 30.0]), np.array([16.0, 17.0]))
    assert list(rem) == [1.0, 0.0]


def test_zero_baseline_is_degenerate():
    resp, rem, degenerate = outcome_arrays(np.array([0.0, 40.0]), np.array([0.0, 20.0]))
    assert degenerate == (0,)
    assert np.isnan(resp[0]) and np.isnan(rem[0])
    assert resp[1] == 1.0


def test_standardize_population_sd():
    schema = small_schema(Feature("x"), Feature("g", "binary"), Feature("c"))
    cohort = make_cohort(schema, [[10, 0, 5], [20, 1, 5], [30, 1, 5]], [40] * 3, [20] * 3)
    grid, scaler = standardize(cohort, cohort)
    assert np.allclose(grid[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    assert np.array_equal(grid[:, 1], [0, 1, 1])
    assert np.array_equal(grid[:, 2], [5, 5, 5])
    assert len(scaler.warnings) == 1 and "c" in scaler.warnings[0]


def test_standardize_uses_train_statistics_only():
    scaler = fit_scaler(np.array([[0.0], [2.0]]), [False])
    assert np.allclose(scaler.transform(np.array([[4.0]])), [[3.0]])


def test_folds_ten_patients():
    y = np.array([1] * 5 + [0] * 5)
    folds = stratified_folds(y, 5, np.random.default_rng(0))
    for f in range(5):
        m = folds.test_mask(f)
        assert y[m].sum() == 1 and (1 - y[m]).sum() == 1


def test_folds_k1_and_small_class():
    with pytest.raises(ConfigError):
        stratified_folds(np.array([0, 1, 0, 1]), 1, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        stratified_folds(np.array([1, 0, 0, 0, 0, 0]), 2, np.random.default_rng(0))


def test_folds_deterministic():
    y = np.random.default_rng(3).random(50) < 0.4
    a = stratified_folds(y, 5, np.random.default_rng(9))
    b = stratified_folds(y, 5, np.random.default_rng(9))
    assert np.array_equal(a.fold_of, b.fold_of)


@settings(max_examples=200, deadline=None)
@given(n_pos=st.integers(2, 40), n_neg=st.integers(2, 40), k=st.integers(2, 6), seed=st.integers(0, 2**31))
def test_fold_balance(n_pos, n_neg, k, seed):
    if n_pos < k or n_neg < k:
        return
    y = np.array([1] * n_pos + [0] * n_neg)
    folds = stratified_folds(y, k, np.random.default_rng(seed))
    sizes = folds.sizes()
    assert sizes.max() - sizes.min() <= 1
    for f in range(k):
        m = folds.test_mask(f)
        assert abs(y[m].sum() - m.sum() * y.mean()) <= 1


def test_make_cohort_values_read_only():
    schema = small_schema(Feature("x"))
    cohort = make_cohort(schema, [[1.0]], [40], [20])
    with pytest.raises(ValueError):
        cohort.values[0, 0] = 2.0


def test_default_schema_without_extra():
    assert len(default_schema(None)) == 16
