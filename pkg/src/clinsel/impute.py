"""Chained-equations multiple imputation with posterior-draw noise.

Predictors and the two outcome-defining scores are imputed jointly; binary
outcomes are re-derived from the completed scores afterwards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import streams
from .dataset import REMISSION_CUTOFF, YBOCS_BOUNDS, Cohort, is_response
from .errors import ConfigError, ImputationError

N_SWEEPS = 10
RIDGE = 1e-6
MIN_OBSERVED = 3
# relative |R_ii| below which a regressor is treated as linearly dependent
PIVOT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ImputedCohort:
    base: Cohort
    completed_values: np.ndarray
    completed_baseline: np.ndarray
    completed_final: np.ndarray
    response: np.ndarray
    remission: np.ndarray
    imputation_index: int

    @property
    def schema(self):
        return self.base.schema

    @property
    def n_patients(self):
        return self.completed_values.shape[0]

    def outcome(self, name: str) -> np.ndarray:
        if name not in ("response", "remission"):
            raise ConfigError(f"unknown outcome {name!r}")
        return getattr(self, name)


def completed_outcomes(baseline, final):
    """Binary outcomes on a completed grid; a non-positive baseline counts as non-response."""
    baseline = np.asarray(baseline, dtype=float)
    final = np.asarray(final, dtype=float)
    response = np.zeros(baseline.shape[0], dtype=bool)
    pos = baseline > 0
    response[pos] = is_response(baseline[pos], final[pos])
    return response, final <= REMISSION_CUTOFF


def _column_specs(cohort: Cohort):
    """(name, bounds, discrete) for every imputed column: features then scores."""
    specs = [(f.name, f.bounds, f.is_discrete) for f in cohort.schema.features]
    specs += [("ybocs_baseline", YBOCS_BOUNDS, False), ("ybocs_final", YBOCS_BOUNDS, False)]
    return specs


def _postprocess(vals, bounds, discrete):
    if discrete:
        vals = np.round(vals)
    if bounds is not None:
        vals = np.clip(vals, bounds[0], bounds[1])
    return vals


def _draw_intercept_only(y_obs, n_mis, rng):
    n = y_obs.size
    mean = y_obs.mean()
    var = y_obs.var(ddof=1) if n > 1 else 0.0
    mu = mean + np.sqrt(var / n) * rng.standard_normal()
    return mu + np.sqrt(var) * rng.standard_normal(n_mis)


def _independent_columns(X):
    """Indices of a maximal linearly independent column subset (pivoted QR)."""
    if X.shape[1] == 0:
        return np.arange(0)
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.arange(0)
    keep = piv[: diag.size][diag > PIVOT_TOL * diag[0]]
    return np.sort(keep)


def draw_conditional(X_obs, y_obs, X_mis, rng):
    """One Bayesian linear-regression posterior draw for the missing targets.

    Constant and linearly dependent regressors are dropped first; with fewer
    than ``MIN_OBSERVED`` targets, no usable regressor, or no residual degrees
    of freedom, an intercept-only model is used instead.
    """
    n_obs = y_obs.size
    n_mis = X_mis.shape[0]
    if n_obs < MIN_OBSERVED or X_obs.shape[1] == 0:
        return _draw_intercept_only(y_obs, n_mis, rng)
    mu = X_obs.mean(axis=0)
    sd = X_obs.std(axis=0)
    live = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    if not np.any(live):
        return _draw_intercept_only(y_obs, n_mis, rng)
    Xo = (X_obs[:, live] - mu[live]) / sd[live]
    Xm = (X_mis[:, live] - mu[live]) / sd[live]
    keep = _independent_columns(Xo)
    Xo = np.column_stack([np.ones(n_obs), Xo[:, keep]])
    Xm = np.column_stack([np.ones(n_mis), Xm[:, keep]])
    q = Xo.shape[1]
    df = n_obs - q
    if q == 1 or df < 1:
        return _draw_intercept_only(y_obs, n_mis, rng)
    A = Xo.T @ Xo + RIDGE * np.eye(q)
    chol = scipy.linalg.cho_factor(A, lower=True)
    beta = scipy.linalg.cho_solve(chol, Xo.T @ y_obs)
    resid = y_obs - Xo @ beta
    sigma = np.sqrt(resid @ resid / rng.chisquare(df))
    # beta* ~ N(beta, sigma^2 A^-1): solve L^T u = z with A = L L^T
    z = rng.standard_normal(q)
    L = np.tril(chol[0])
    beta_star = beta + sigma * scipy.linalg.solve_triangular(L.T, z, lower=False)
    return Xm @ beta_star + sigma * rng.standard_normal(n_mis)


def impute_once(cohort: Cohort, index: int, rng: np.random.Generator, n_sweeps: int = N_SWEEPS) -> ImputedCohort:
    grid = np.column_stack([cohort.values, cohort.ybocs_baseline, cohort.ybocs_final])
    mask = np.isnan(grid)
    specs = _column_specs(cohort)
    targets = [j for j in range(grid.shape[1]) if mask[:, j].any()]
    for j in range(grid.shape[1]):
        if mask[:, j].all() and grid.shape[0] > 0:
            raise ImputationError(f"column {specs[j][0]!r} has no observed values")

    filled = grid.copy()
    for j in targets:
        obs = grid[~mask[:, j], j]
        filled[mask[:, j], j] = rng.choice(obs, size=int(mask[:, j].sum()), replace=True)

    others = {j: np.array([c for c in range(grid.shape[1]) if c != j]) for j in targets}
    for _ in range(n_sweeps if targets else 0):
        for j in targets:
            miss = mask[:, j]
            X = filled[:, others[j]]
            draw = draw_conditional(X[~miss], filled[~miss, j], X[miss], rng)
            _, bounds, discrete = specs[j]
            filled[miss, j] = _postprocess(draw, bounds, discrete)

    p = cohort.values.shape[1]
    values = filled[:, :p]
    baseline = filled[:, p]
    final = filled[:, p + 1]
    response, remission = completed_outcomes(baseline, final)
    for arr in (values, baseline, final, response, remission):
        arr.setflags(write=False)
    return ImputedCohort(cohort, values, baseline, final, response, remission, index)


def impute_many(cohort: Cohort, m_count: int, seed: int, n_sweeps: int = N_SWEEPS, jobs: int = 1) -> list[ImputedCohort]:
    """Return ``m_count`` completed copies; imputation m uses its own substream."""
    if m_count < 1:
        raise ConfigError(f"m_imputations must be >= 1, got {m_count}")

    def one(m):
        return impute_once(cohort, m, streams.substream(seed, streams.IMPUTE, m), n_sweeps)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, range(m_count)))
    return [one(m) for m in range(m_count)]
