"""Two-sample tests and per-condition summaries of gait characteristics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .copula import AnalysisWarning

__all__ = [
    "MANN_WHITNEY",
    "KOLMOGOROV_SMIRNOV",
    "WELCH_T",
    "EXACT_MW_MAX_N",
    "TABLE_ORDER",
    "ComparisonRow",
    "SummaryStats",
    "TestResult",
    "compare_conditions",
    "ks_two_sample",
    "mann_whitney",
    "mw_null_counts",
    "summarize",
    "welch_t",
]

MANN_WHITNEY = "MannWhitney"
KOLMOGOROV_SMIRNOV = "KolmogorovSmirnov"
WELCH_T = "WelchT"

# exact Mann-Whitney p-values up to this pooled size (tie-free samples only)
EXACT_MW_MAX_N = 20

# row order of the published comparison table
TABLE_ORDER = (
    "speed",
    "pace",
    "speed_var",
    "stride_time",
    "stride_time_var",
    "accel_range",
    "movement_intensity",
    "low_freq_pct",
    "stride_freq",
)


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: Optional[float]
    ties_present: bool
    n1: int
    n2: int
    exact: bool = False

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    variance: float
    n: int


def _sample(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise ValueError(f"sample {name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"sample {name} contains non-finite values")
    return a


def summarize(x) -> SummaryStats:
    a = _sample(x, "x")
    var = float(np.var(a, ddof=1)) if a.size > 1 else 0.0
    return SummaryStats(float(np.mean(a)), var, int(a.size))


# ---------------------------------------------------------------------------
# Mann-Whitney
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def mw_null_counts(n1: int, n2: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U = 0..n1*n2 under the null.

    Built with the usual recurrence on the largest pooled observation:
    it either belongs to the first sample (adding n2 to U) or not.
    """
    if n1 == 0 or n2 == 0:
        return (1,)
    a = mw_null_counts(n1 - 1, n2)
    b = mw_null_counts(n1, n2 - 1)
    out = [0] * (n1 * n2 + 1)
    for u, c in enumerate(a):
        out[u + n2] += c
    for u, c in enumerate(b):
        out[u] += c
    return tuple(out)


def _mw_exact_p(u: float, n1: int, n2: int) -> float:
    counts = mw_null_counts(n1, n2)
    total = sum(counts)
    u = int(round(u))
    lower = sum(counts[: u + 1])
    upper = sum(counts[u:])
    return min(1.0, 2.0 * min(lower, upper) / total)


def mann_whitney(x, y) -> TestResult:
    """Two-sided Wilcoxon rank-sum / Mann-Whitney test.

    The statistic is U for ``x``: the number of pairs with ``x_i > y_j``,
    ties counting one half. The p-value is exact (full null distribution)
    when the pooled size is at most 20 and there are no ties; otherwise it
    uses the normal approximation with tie-corrected variance and a
    continuity correction of 0.5.
    """
    x = _sample(x, "x")
    y = _sample(y, "y")
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = stats.rankdata(pooled)
    u = float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)
    _, tie_sizes = np.unique(pooled, return_counts=True)
    ties = bool(np.any(tie_sizes > 1))

    if not ties and n1 + n2 <= EXACT_MW_MAX_N:
        return TestResult(MANN_WHITNEY, u, _mw_exact_p(u, n1, n2), ties, n1, n2, exact=True)

    n = n1 + n2
    tie_term = float(np.sum(tie_sizes.astype(float) ** 3 - tie_sizes))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        # every pooled value identical
        return TestResult(MANN_WHITNEY, u, 1.0, ties, n1, n2)
    z = (abs(u - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    p = 1.0 if z <= 0 else min(1.0, 2.0 * float(stats.norm.sf(z)))
    return TestResult(MANN_WHITNEY, u, p, ties, n1, n2)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def ks_two_sample(x, y) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test, asymptotic two-sided p-value.

    ``D = max |F_x - F_y|`` over the pooled sample points. The p-value uses
    the Kolmogorov limit distribution with Stephens' small-sample
    correction ``(sqrt(m) + 0.12 + 0.11 / sqrt(m)) * D``, ``m = n1 n2 / (n1 + n2)``.
    When a value occurs in both samples ``ties_present`` is set: the
    p-value is still reported but is only approximate.
    """
    x = _sample(x, "x")
    y = _sample(y, "y")
    n1, n2 = x.size, y.size
    xs, ys = np.sort(x), np.sort(y)
    grid = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, grid, side="right") / n1
    cdf_y = np.searchsorted(ys, grid, side="right") / n2
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    ties = bool(np.intersect1d(xs, ys).size)
    m = n1 * n2 / (n1 + n2)
    lam = (math.sqrt(m) + 0.12 + 0.11 / math.sqrt(m)) * d
    p = float(min(1.0, max(0.0, special.kolmogorov(lam))))
    return TestResult(KOLMOGOROV_SMIRNOV, d, p, ties, n1, n2)


# ---------------------------------------------------------------------------
# Welch
# ---------------------------------------------------------------------------

def welch_t(x, y) -> TestResult:
    """Welch's unequal-variance t-test with Satterthwaite degrees of freedom."""
    x = _sample(x, "x")
    y = _sample(y, "y")
    n1, n2 = x.size, y.size
    if n1 < 2 or n2 < 2:
        raise ValueError("Welch t-test needs at least 2 observations per sample")
    m1, m2 = float(np.mean(x)), float(np.mean(y))
    a = float(np.var(x, ddof=1)) / n1
    b = float(np.var(y, ddof=1)) / n2
    ties = bool(np.intersect1d(x, y).size)
    if a + b == 0.0:
        if m1 == m2:
            return TestResult(WELCH_T, 0.0, 1.0, ties, n1, n2)
        raise ValueError("zero pooled variance")
    t = (m1 - m2) / math.sqrt(a + b)
    df = (a + b) ** 2 / (a * a / (n1 - 1) + b * b / (n2 - 1))
    p = min(1.0, 2.0 * float(stats.t.sf(abs(t), df)))
    return TestResult(WELCH_T, t, p, ties, n1, n2)


# ---------------------------------------------------------------------------
# condition comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    feature: str
    tug: Optional[SummaryStats]
    daily: Optional[SummaryStats]
    ks: Optional[TestResult]
    mw: Optional[TestResult]


def compare_conditions(table, features: Sequence[str] | None = None) -> list[ComparisonRow]:
    """Summaries plus K-S and M-W tests of TUG against Daily, one row per feature.

    ``table`` is a DataFrame with a ``condition`` column (``TUG`` / ``Daily``)
    and one column per feature; missing values are dropped per feature.
    Rows follow the published table order.
    """
    cond = table["condition"].astype(str)
    if not ((cond == "TUG").any() and (cond == "Daily").any()):
        raise ValueError("both TUG and Daily rows are required for a comparison")
    if features is None:
        features = [f for f in TABLE_ORDER if f in table.columns]
    else:
        features = sorted(features, key=lambda f: TABLE_ORDER.index(f) if f in TABLE_ORDER else len(TABLE_ORDER))

    rows = []
    for feature in features:
        a = table.loc[cond == "TUG", feature].dropna().to_numpy(dtype=float)
        b = table.loc[cond == "Daily", feature].dropna().to_numpy(dtype=float)
        tug = summarize(a) if a.size else None
        daily = summarize(b) if b.size else None
        if a.size and b.size:
            ks, mw = ks_two_sample(a, b), mann_whitney(a, b)
            if ks.ties_present:
                warnings.warn(f"{feature}: values shared between conditions; K-S p-value is approximate",
                              AnalysisWarning, stacklevel=2)
        else:
            ks = mw = None
            warnings.warn(f"{feature}: no usable values in "
                          f"{'TUG' if not a.size else 'Daily'}; tests skipped",
                          AnalysisWarning, stacklevel=2)
        rows.append(ComparisonRow(feature, tug, daily, ks, mw))
    return rows
