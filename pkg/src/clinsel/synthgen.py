"""Synthetic cohorts with planted structure.

Credibility drives response through three probability bands split at 16 and
22, is correlated with expectancy through a Gaussian copula, and feeds a
logistic remission link. Everything else is independent noise. Missingness is
injected last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special, stats

from . import streams
from .dataset import (REMISSION_CUTOFF, YBOCS_BOUNDS, FeatureSchema, default_schema, is_response,
                      make_cohort)
from .errors import GenerationError

CRED_RANGE = (3, 27)
CRED_MEAN = 18.0
CRED_SD = 5.0
LOW_CUT = 16
HIGH_CUT = 22
# baselines of 26+ leave room for "responded but did not remit" finals (>16, <=70% of baseline)
BASELINE_RANGE = (26, 44)
MECHANISMS = ("MCAR", "MAR")


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int = 300
    cred_expect_corr: float = 0.67
    response_probs: tuple[float, float, float] = (0.15, 0.40, 0.75)
    plant_thresholds: bool = True
    # response probability for everybody when planting is off
    null_response_prob: float = 0.4
    # remission among responders: logit = b0 + b1*z(credibility) + b2*z(baseline severity)
    remission_link: tuple[float, float, float] = (0.0, 1.0, -0.5)
    missing_rate: float = 0.1
    mechanism: str = "MCAR"
    mar_covariate: str = "age"
    mar_strength: float = 1.0
    seed: int = 0
    schema: FeatureSchema = field(default_factory=default_schema)

    def validate(self):
        if self.n_patients < 0:
            raise GenerationError("n_patients must be >= 0")
        if not -1 < self.cred_expect_corr < 1:
            raise GenerationError("cred_expect_corr must lie in (-1, 1)")
        lo, mid, hi = self.response_probs
        if self.plant_thresholds and not 0 <= lo < mid < hi <= 1:
            raise GenerationError(f"response_probs must satisfy 0 <= low < mid < high <= 1, got {self.response_probs}")
        if not 0 <= self.null_response_prob <= 1:
            raise GenerationError("null_response_prob must lie in [0, 1]")
        if not 0 <= self.missing_rate < 1:
            raise GenerationError("missing_rate must lie in [0, 1)")
        if self.mechanism not in MECHANISMS:
            raise GenerationError(f"mechanism must be one of {MECHANISMS}")
        names = self.schema.names
        for need in ("credibility", "expectancy"):
            if need not in names:
                raise GenerationError(f"schema lacks {need!r}, which the generator plants")
        if self.mechanism == "MAR" and self.mar_covariate not in names:
            raise GenerationError(f"MAR covariate {self.mar_covariate!r} not in schema")
        return self


# --- credibility marginal and copula calibration ------------------------------

def _cred_cuts():
    lo, hi = CRED_RANGE
    levels = np.arange(lo + 1, hi + 1)
    return (levels - 0.5 - CRED_MEAN) / CRED_SD


def credibility_pmf() -> dict[int, float]:
    """Exact marginal of the discretised credibility score."""
    lo, hi = CRED_RANGE
    cdf = np.concatenate([[0.0], stats.norm.cdf(_cred_cuts()), [1.0]])
    return {v: float(cdf[i + 1] - cdf[i]) for i, v in enumerate(range(lo, hi + 1))}


def discretize_credibility(z):
    lo, hi = CRED_RANGE
    return np.clip(np.round(CRED_MEAN + CRED_SD * np.asarray(z)), lo, hi)


def _hermite_coeffs(cuts, order=60):
    """E[g(Z) He_k(Z)] for the step function g = sum 1{Z > t}, k = 1..order.

    Uses E[1{Z > t} He_k(Z)] = phi(t) He_{k-1}(t).
    """
    phi = stats.norm.pdf(cuts)
    he_prev = np.zeros_like(cuts)
    he = np.ones_like(cuts)
    coeffs = []
    for k in range(1, order + 1):
        coeffs.append(float(np.sum(phi * he)))
        he_prev, he = he, cuts * he - (k - 1) * he_prev
    return np.array(coeffs)


def discretized_correlation(latent_rho: float, order: int = 60) -> float:
    """Pearson correlation of two discretised scores under a latent normal correlation."""
    c = _hermite_coeffs(_cred_cuts(), order)
    k = np.arange(1, order + 1)
    cov = np.sum(c ** 2 / special.factorial(k) * latent_rho ** k)
    pmf = credibility_pmf()
    levels = np.array(list(pmf), dtype=float)
    mass = np.array(list(pmf.values()))
    var = mass @ levels ** 2 - (mass @ levels) ** 2
    return float(cov / var)


def latent_correlation(target: float) -> float:
    if target == 0:
        return 0.0
    return float(optimize.brentq(lambda r: discretized_correlation(r) - target, -0.9999, 0.9999, xtol=1e-12))


def band_probabilities(config: GeneratorConfig, cred):
    cred = np.asarray(cred)
    if not config.plant_thresholds:
        return np.full(cred.shape, config.null_response_prob)
    lo, mid, hi = config.response_probs
    return np.where(cred <= LOW_CUT, lo, np.where(cred <= HIGH_CUT, mid, hi))


def population_odds_ratios(config: GeneratorConfig) -> dict[str, float]:
    """Closed-form response odds ratios for "<= 16" and "> 22" under the generator."""
    pmf = credibility_pmf()
    levels = np.array(list(pmf))
    mass = np.array(list(pmf.values()))
    p = band_probabilities(config, levels)

    def or_for(exposed):
        pe = np.sum(mass[exposed] * p[exposed]) / np.sum(mass[exposed])
        pu = np.sum(mass[~exposed] * p[~exposed]) / np.sum(mass[~exposed])
        return (pe / (1 - pe)) / (pu / (1 - pu))

    return {"<= 16": float(or_for(levels <= LOW_CUT)), "> 22": float(or_for(levels > HIGH_CUT))}


# --- feature draws ------------------------------------------------------------

def _bern(rng, p, n):
    return (rng.random(n) < p).astype(float)


def _ordinal(rng, n, lo, hi, mean, sd):
    return np.clip(np.round(rng.normal(mean, sd, n)), lo, hi)


_DRAWS = {
    "age": lambda rng, n: rng.integers(18, 66, n).astype(float),
    "gender_identity": lambda rng, n: _bern(rng, 0.75, n),
    "sexual_minority": lambda rng, n: _bern(rng, 0.2, n),
    "race_ethnicity": lambda rng, n: _bern(rng, 0.3, n),
    "postgrad_education": lambda rng, n: _bern(rng, 0.35, n),
    "urica": lambda rng, n: rng.normal(9.0, 2.0, n),
    "babs_tot_recalc": lambda rng, n: _ordinal(rng, n, 0, 24, 12, 4),
    "qids": lambda rng, n: _ordinal(rng, n, 0, 27, 12, 5),
    "bdd_duration": lambda rng, n: np.clip(rng.gamma(2.0, 6.0, n), 0, 80),
    "treatment_group": lambda rng, n: _bern(rng, 0.5, n),
    "ssri_use": lambda rng, n: _bern(rng, 0.4, n),
    "any_comorbidity": lambda rng, n: _bern(rng, 0.6, n),
    "covid_impact": lambda rng, n: rng.integers(1, 6, n).astype(float),
}


def _generic_draw(feature, rng, n):
    if feature.is_binary:
        return _bern(rng, 0.5, n)
    if feature.bounds is None:
        return rng.standard_normal(n)
    lo, hi = feature.bounds
    vals = rng.uniform(lo, hi, n)
    return np.round(vals).clip(lo, hi) if feature.kind == "ordinal" else vals


def _final_scores(rng, baseline, respond, remit):
    """Integer finals consistent with the drawn outcome flags."""
    lo, hi = YBOCS_BOUNDS
    final = np.empty(baseline.shape)
    for i, (b, r, m) in enumerate(zip(baseline, respond, remit)):
        cand = np.arange(int(lo), int(hi) + 1, dtype=float)
        resp = is_response(np.full(cand.shape, b), cand)
        if m:
            ok = resp & (cand <= REMISSION_CUTOFF) & (cand >= 4)
        elif r:
            ok = resp & (cand > REMISSION_CUTOFF)
        else:
            ok = ~resp & (cand <= min(hi, b + 4))
        final[i] = rng.choice(cand[ok])
    return final


def generate(config: GeneratorConfig, return_complete: bool = False):
    """Draw a cohort. With ``return_complete`` also return the pre-missingness copy."""
    config.validate()
    rng = streams.substream(config.seed, streams.GENERATE)
    n = config.n_patients
    schema = config.schema

    rho = latent_correlation(config.cred_expect_corr)
    z1 = rng.standard_normal(n)
    z2 = rho * z1 + math.sqrt(1 - rho ** 2) * rng.standard_normal(n)
    cred = discretize_credibility(z1)
    expect = discretize_credibility(z2)
    baseline = rng.integers(BASELINE_RANGE[0], BASELINE_RANGE[1] + 1, n).astype(float)

    respond = rng.random(n) < band_probabilities(config, cred)
    b0, b1, b2 = config.remission_link if config.plant_thresholds else (0.0, 0.0, 0.0)
    mid_base = 0.5 * (BASELINE_RANGE[0] + BASELINE_RANGE[1])
    logit = b0 + b1 * (cred - CRED_MEAN) / CRED_SD + b2 * (baseline - mid_base) / 6.0
    remit = respond & (rng.random(n) < special.expit(logit))
    final = _final_scores(rng, baseline, respond, remit)

    cols = []
    for feat in schema.features:
        if feat.name == "credibility":
            cols.append(cred)
        elif feat.name == "expectancy":
            cols.append(expect)
        elif feat.name == "bdd_ybocs_baseline":
            cols.append(baseline.copy())
        elif feat.name in _DRAWS:
            cols.append(_DRAWS[feat.name](rng, n))
        else:
            cols.append(_generic_draw(feat, rng, n))
    values = np.column_stack(cols) if cols else np.empty((n, 0))
    for j, feat in enumerate(schema.features):
        if feat.bounds is not None:
            values[:, j] = np.clip(values[:, j], *feat.bounds)

    complete = make_cohort(schema, values, baseline, final)
    grid = np.column_stack([values, baseline, final])
    mask = _missing_mask(config, rng, grid)
    grid = np.where(mask, np.nan, grid)
    p = len(schema)
    cohort = make_cohort(schema, grid[:, :p], grid[:, p], grid[:, p + 1])
    return (cohort, complete) if return_complete else cohort


def _missing_mask(config, rng, grid):
    n, q = grid.shape
    if config.missing_rate == 0 or n == 0:
        return np.zeros((n, q), dtype=bool)
    if config.mechanism == "MCAR":
        return rng.random((n, q)) < config.missing_rate
    j = config.schema.index(config.mar_covariate)
    cov = grid[:, j]
    z = (cov - cov.mean()) / (cov.std() or 1.0)
    prob = special.expit(special.logit(config.missing_rate) + config.mar_strength * z)
    mask = rng.random((n, q)) < prob[:, None]
    # the driving covariate stays fully observed, which is what makes this MAR
    mask[:, j] = False
    return mask


def noise_config(**overrides) -> GeneratorConfig:
    """A cohort with no planted signal at all."""
    return replace(GeneratorConfig(plant_thresholds=False), **overrides)
