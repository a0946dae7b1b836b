import numpy as np
import pytest
from scipy import stats

from clinsel.dataset import FeatureSchema, default_schema
from clinsel.errors import GenerationError
from clinsel.synthgen import (GeneratorConfig, credibility_pmf, discretized_correlation, generate,
                              latent_correlation, noise_config, population_odds_ratios)


@pytest.fixture(scope="module")
def big():
    return generate(GeneratorConfig(n_patients=5000, seed=17), return_complete=True)


def test_no_missing_when_rate_zero():
    cohort = generate(GeneratorConfig(n_patients=200, missing_rate=0.0, seed=1))
    assert not cohort.missing.any()
    assert not np.isnan(cohort.ybocs_final).any()


def test_correlation_target(big):
    cohort, _ = big
    c = cohort.column("credibility")
    e = cohort.column("expectancy")
    ok = ~np.isnan(c) & ~np.isnan(e)
    assert abs(np.corrcoef(c[ok], e[ok])[0, 1] - 0.67) <= 0.04


def test_latent_calibration_hits_target_exactly():
    rho = latent_correlation(0.67)
    assert rho > 0.67
    assert discretized_correlation(rho) == pytest.approx(0.67, abs=1e-9)


def test_calibration_agrees_with_simulation():
    # independent check of the series: simulate the latent pair directly
    rho = latent_correlation(0.5)
    rng = np.random.default_rng(0)
    z1 = rng.standard_normal(400_000)
    z2 = rho * z1 + np.sqrt(1 - rho ** 2) * rng.standard_normal(z1.size)
    d1 = np.clip(np.round(18 + 5 * z1), 3, 27)
    d2 = np.clip(np.round(18 + 5 * z2), 3, 27)
    assert np.corrcoef(d1, d2)[0, 1] == pytest.approx(0.5, abs=0.005)


def test_high_band_response_rate(big):
    _, complete = big
    high = complete.column("credibility") > 22
    assert abs(complete.response[high].mean() - 0.75) <= 0.03


def test_credibility_integer_in_range(big):
    _, complete = big
    c = complete.column("credibility")
    assert np.array_equal(c, np.round(c)) and c.min() >= 3 and c.max() <= 27
    assert sum(credibility_pmf().values()) == pytest.approx(1.0)


def test_outcome_flags_consistent_with_scores(big):
    _, complete = big
    assert np.all(complete.remission <= complete.response)
    assert np.array_equal(complete.column("bdd_ybocs_baseline"), complete.ybocs_baseline)


def test_deterministic_given_seed():
    a = generate(GeneratorConfig(n_patients=100, seed=3))
    b = generate(GeneratorConfig(n_patients=100, seed=3))
    assert np.array_equal(a.values, b.values, equal_nan=True)
    c = generate(GeneratorConfig(n_patients=100, seed=4))
    assert not np.array_equal(a.values, c.values, equal_nan=True)


def test_mcar_rate_and_independence():
    cohort = generate(GeneratorConfig(n_patients=2000, missing_rate=0.2, seed=5))
    rate = cohort.missing.mean()
    assert abs(rate - 0.2) < 0.01
    # missingness of one column is independent of another column's missingness
    a = cohort.missing[:, 0]
    b = cohort.missing[:, 1]
    table = [[np.sum(a & b), np.sum(a & ~b)], [np.sum(~a & b), np.sum(~a & ~b)]]
    assert stats.chi2_contingency(table).pvalue > 0.001


def test_mar_depends_on_covariate():
    cfg = GeneratorConfig(n_patients=3000, missing_rate=0.2, mechanism="MAR", mar_strength=1.5, seed=6)
    cohort, complete = generate(cfg, return_complete=True)
    age = complete.column("age")
    assert not cohort.missing[:, cohort.schema.index("age")].any()
    miss = cohort.missing[:, cohort.schema.index("urica")]
    assert age[miss].mean() > age[~miss].mean() + 3


def test_noise_config_has_no_credibility_effect():
    _, complete = generate(noise_config(n_patients=4000, seed=2), return_complete=True)
    c = complete.column("credibility")
    low, high = complete.response[c <= 16].mean(), complete.response[c > 22].mean()
    assert abs(low - high) < 0.06


def test_population_odds_ratios():
    ors = population_odds_ratios(GeneratorConfig())
    assert ors["<= 16"] < 1 < ors["> 22"]


@pytest.mark.parametrize("kwargs", [
    dict(response_probs=(0.5, 0.4, 0.75)),
    dict(missing_rate=1.0),
    dict(cred_expect_corr=1.0),
    dict(mechanism="MNAR"),
])
def test_invalid_config(kwargs):
    with pytest.raises(GenerationError):
        generate(GeneratorConfig(**kwargs))


def test_schema_without_planted_features_rejected():
    schema = default_schema(None)
    reduced = FeatureSchema(tuple(f for f in schema.features if f.name != "credibility"))
    with pytest.raises(GenerationError):
        generate(GeneratorConfig(schema=reduced))
