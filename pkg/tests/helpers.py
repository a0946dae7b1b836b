"""Small builders shared by the test modules."""

import numpy as np

from clinsel.dataset import FeatureSchema, make_cohort
from clinsel.impute import impute_many


def small_schema(*features):
    return FeatureSchema(tuple(features))


def scores_for(y):
    """Baseline/final pairs whose response flag equals y (remission follows too)."""
    y = np.asarray(y, dtype=bool)
    return np.full(y.size, 40.0), np.where(y, 12.0, 38.0)


def complete_imputed(schema, X, y, m=1):
    """Complete data with response == y, wrapped as m identical imputed cohorts."""
    baseline, final = scores_for(y)
    cohort = make_cohort(schema, np.asarray(X, dtype=float), baseline, final)
    return impute_many(cohort, m, seed=0)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
