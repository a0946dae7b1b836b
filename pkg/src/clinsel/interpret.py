"""Tree cutpoints and the contingency statistics of threshold-defined groups."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .learners.tree import TreeArrays

DEDUP_TOL = 1e-9
FISHER_RTOL = 1e-12
DIRECTIONS = ("<=", ">")


@dataclass(frozen=True)
class Cutpoint:
    value: float
    integer: Optional[int] = None


def extract_thresholds(tree: TreeArrays, feature, names=None, integer_valued=False) -> list[Cutpoint]:
    """Split thresholds on one feature, pre-order, deduplicated.

    With ``integer_valued`` each cutpoint also carries ``floor(cutpoint)``, so a
    midpoint of 16.5 reads as "<= 16".
    """
    if isinstance(feature, str):
        if names is None or feature not in names:
            raise ConfigError(f"feature {feature!r} not among tree features")
        feature = list(names).index(feature)
    out: list[Cutpoint] = []
    for f, t in tree.splits():
        if f != feature:
            continue
        if any(abs(t - c.value) <= DEDUP_TOL for c in out):
            continue
        out.append(Cutpoint(t, math.floor(t) if integer_valued else None))
    return out


@dataclass(frozen=True)
class Table:
    """2x2 counts: (exposed+, exposed-, unexposed+, unexposed-)."""

    a: int
    b: int
    c: int
    d: int

    @property
    def cells(self):
        return (self.a, self.b, self.c, self.d)

    @property
    def total(self):
        return self.a + self.b + self.c + self.d

    @property
    def degenerate(self) -> bool:
        # everyone on one side of the threshold
        return self.a + self.b == 0 or self.c + self.d == 0

    def rows_swapped(self) -> "Table":
        return Table(self.c, self.d, self.a, self.b)

    def cols_swapped(self) -> "Table":
        return Table(self.b, self.a, self.d, self.c)


def exposure(values, cutpoint, direction):
    values = np.asarray(values, dtype=float)
    if direction == "<=":
        return values <= cutpoint
    if direction == ">":
        return values > cutpoint
    raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def contingency_from_arrays(values, outcome, cutpoint, direction) -> Table:
    values = np.asarray(values, dtype=float)
    outcome = np.asarray(outcome, dtype=float)
    keep = ~np.isnan(values) & ~np.isnan(outcome)
    exp = exposure(values[keep], cutpoint, direction)
    pos = outcome[keep] == 1
    return Table(int(np.sum(exp & pos)), int(np.sum(exp & ~pos)), int(np.sum(~exp & pos)), int(np.sum(~exp & ~pos)))


def contingency(cohort, feature: str, cutpoint: float, direction: str, outcome: str) -> Table:
    """Counts over patients with both the feature and the outcome observed.

    Accepts a Cohort (complete cases) or an ImputedCohort (all patients).
    """
    j = cohort.schema.index(feature)
    if hasattr(cohort, "completed_values"):
        values = cohort.completed_values[:, j]
        y = cohort.outcome(outcome).astype(float)
    else:
        values = cohort.values[:, j]
        y = cohort.outcome(outcome)
    return contingency_from_arrays(values, y, cutpoint, direction)


def odds_ratio(table: Table) -> tuple[float, bool]:
    """ad/bc, with +0.5 added to every cell when any cell is zero."""
    a, b, c, d = (float(x) for x in table.cells)
    corrected = min(a, b, c, d) == 0
    if corrected:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    if b * c == 0:
        return math.inf, corrected
    return a * d / (b * c), corrected


def fisher_exact_p(table: Table) -> float:
    """Two-sided Fisher exact p from exact integer hypergeometric weights.

    Sums every table with the observed margins whose probability is at most
    the observed one (relative slack ``FISHER_RTOL``).
    """
    a, b, c, d = (int(x) for x in table.cells)
    if min(a, b, c, d) < 0:
        raise ValueError("table cells must be non-negative")
    r1, r2, c1 = a + b, c + d, a + c
    n = r1 + r2
    lo, hi = max(0, c1 - r2), min(r1, c1)
    # C(r1, x) C(r2, c1 - x) / C(n, c1)
    weights = {x: math.comb(r1, x) * math.comb(r2, c1 - x) for x in range(lo, hi + 1)}
    obs = Fraction(weights[a]) * (1 + Fraction(FISHER_RTOL))
    num = sum(w for w in weights.values() if w <= obs)
    p = Fraction(num, math.comb(n, c1))
    return float(min(p, 1))


@dataclass(frozen=True)
class ThresholdReport:
    feature: str
    cutpoint: float
    integer_cut: Optional[int]
    direction: str
    outcome: str
    table: Table
    odds_ratio: float
    p_value: float
    correction_applied: bool
    frequency: Optional[float] = None

    @property
    def threshold_label(self):
        v = self.integer_cut if self.integer_cut is not None else self.cutpoint
        return f"{self.direction} {v:g}"

    def as_row(self):
        return {
            "feature": self.feature,
            "threshold": self.threshold_label,
            "direction": self.direction,
            "cutpoint": self.cutpoint,
            "integer_cut": "" if self.integer_cut is None else self.integer_cut,
            "outcome": self.outcome,
            "frequency": "" if self.frequency is None else self.frequency,
            "exposed_pos": self.table.a,
            "exposed_neg": self.table.b,
            "unexposed_pos": self.table.c,
            "unexposed_neg": self.table.d,
            "degenerate": self.table.degenerate,
            "odds_ratio": "inf" if math.isinf(self.odds_ratio) else self.odds_ratio,
            "p_value": self.p_value,
            "correction_applied": self.correction_applied,
        }


def threshold_report(values, outcome_values, feature, cutpoint, direction, outcome_name,
                     integer_cut=None, frequency=None) -> ThresholdReport:
    cut = integer_cut if integer_cut is not None else cutpoint
    table = contingency_from_arrays(values, outcome_values, cut, direction)
    orat, corrected = odds_ratio(table)
    return ThresholdReport(feature, float(cutpoint), integer_cut, direction, outcome_name, table,
                           orat, fisher_exact_p(table), corrected, frequency)


def aggregate_cutpoints(per_tree: Sequence[Sequence[int]], min_frequency=0.5, window=1):
    """Integer cutpoints that recur (within +-window) in at least ``min_frequency`` of trees.

    Returns [(value, frequency)] sorted by value. Candidates are taken in order
    of decreasing frequency, then decreasing exact count, then lower value, and a
    candidate is dropped when its window overlaps one already accepted.
    """
    n_trees = len(per_tree)
    if n_trees == 0:
        return []
    sets = [set(int(v) for v in cuts) for cuts in per_tree]
    candidates = sorted(set().union(*sets))
    freq = {
        v: sum(any(abs(v - u) <= window for u in s) for s in sets) / n_trees for v in candidates
    }
    exact = {v: sum(v in s for s in sets) for v in candidates}
    accepted = []
    for v in sorted(candidates, key=lambda v: (-freq[v], -exact[v], v)):
        if freq[v] < min_frequency:
            break
        if any(abs(v - u) <= 2 * window for u in accepted):
            continue
        accepted.append(v)
    return [(v, freq[v]) for v in sorted(accepted)]
