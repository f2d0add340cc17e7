import math
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gaitce.copula import AnalysisWarning
from gaitce.hypotest import (
    TABLE_ORDER,
    compare_conditions,
    ks_two_sample,
    mann_whitney,
    mw_null_counts,
    summarize,
    welch_t,
)
from oracles import ks_bruteforce, mw_exact_p_enumerate, mw_u


def test_summarize_cases():
    s = summarize([1, 2, 3])
    assert (s.mean, s.variance, s.n) == (2.0, 1.0, 3)
    assert summarize([4.5]).variance == 0.0
    with pytest.raises(ValueError, match="empty"):
        summarize([])


def test_mw_hand_case():
    r = mann_whitney([1, 2], [3, 4])
    assert r.statistic == 0 and r.exact
    assert r.p_value == pytest.approx(1 / 3, abs=1e-15)


def test_mw_identical_samples():
    r = mann_whitney([1, 2, 3], [1, 2, 3])
    assert r.statistic == 4.5 and r.ties_present and not r.exact
    assert r.p_value == pytest.approx(1.0)


def test_mw_exact_bruteforce_six_six():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=6), rng.normal(size=6) + 0.8
    assert mann_whitney(x, y).p_value == pytest.approx(mw_exact_p_enumerate(x, y), abs=1e-12)


def test_mw_null_counts_sum_to_binomial():
    for n1, n2 in ((1, 1), (3, 5), (7, 7), (10, 10)):
        counts = mw_null_counts(n1, n2)
        assert sum(counts) == math.comb(n1 + n2, n1)
        assert counts == counts[::-1]


def test_mw_normal_approximation_matches_reference():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=40), rng.normal(size=35) + 0.3
    r = mann_whitney(x, y)
    ref = stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert r.statistic == ref.statistic
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_mw_tie_corrected_variance_matches_reference():
    rng = np.random.default_rng(2)
    x, y = rng.integers(0, 5, 30).astype(float), rng.integers(1, 6, 25).astype(float)
    r = mann_whitney(x, y)
    ref = stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert r.ties_present and r.p_value == pytest.approx(ref.pvalue, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=15),
       st.lists(st.integers(-20, 20), min_size=1, max_size=15))
def test_mw_u_complement_property(x, y):
    u_xy = mann_whitney(x, y).statistic
    assert u_xy == mw_u(x, y)
    assert u_xy + mann_whitney(y, x).statistic == len(x) * len(y)


def test_ks_hand_cases():
    assert ks_two_sample([1, 2, 3], [1, 2, 3]).statistic == 0.0
    assert ks_two_sample([1, 2], [5, 6, 7]).statistic == 1.0
    r = ks_two_sample([1, 2, 3], [2, 3, 4])
    assert r.statistic == pytest.approx(1 / 3) and r.ties_present


def test_ks_statistic_matches_scipy_and_p_formula():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=50), rng.normal(size=70) + 0.4
    r = ks_two_sample(x, y)
    assert r.statistic == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-15)
    m = 50 * 70 / 120
    lam = (math.sqrt(m) + 0.12 + 0.11 / math.sqrt(m)) * r.statistic
    tail = 2 * sum((-1) ** (j - 1) * math.exp(-2 * j * j * lam * lam) for j in range(1, 200))
    assert r.p_value == pytest.approx(tail, rel=1e-9)
    assert not r.ties_present


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=12),
       st.lists(st.integers(0, 8), min_size=1, max_size=12))
def test_ks_bruteforce_property(x, y):
    d = ks_two_sample(x, y).statistic
    assert d == ks_bruteforce(x, y)
    assert (d == 0) == _same_ecdf(x, y)
    if len(x) == len(y):
        assert (d == 0) == (sorted(x) == sorted(y))


def _same_ecdf(x, y):
    # multisets equal up to a common replication factor
    return all(sum(a <= v for a in x) * len(y) == sum(b <= v for b in y) * len(x) for v in set(x) | set(y))


def test_welch_cases():
    assert welch_t([1.0, 1.0], [1.0, 1.0]).p_value == 1.0
    r = welch_t([1, 2, 3, 4], [1, 2, 3, 4])
    assert r.statistic == 0 and r.p_value == 1.0
    with pytest.raises(ValueError, match="zero pooled variance"):
        welch_t([0, 0], [1, 1])


def test_welch_formula_recomputation():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=30), rng.normal(1.0, 2.0, size=30)
    r = welch_t(x, y)
    a, b = x.var(ddof=1) / 30, y.var(ddof=1) / 30
    t = (x.mean() - y.mean()) / math.sqrt(a + b)
    df = (a + b) ** 2 / (a * a / 29 + b * b / 29)
    assert r.statistic == pytest.approx(t, abs=1e-12)
    assert r.p_value == pytest.approx(2 * stats.t.sf(abs(t), df), abs=1e-12)


def _cond_table(tug, daily, feature="speed"):
    return pd.DataFrame({
        "condition": ["TUG"] * len(tug) + ["Daily"] * len(daily),
        feature: np.concatenate([tug, daily]),
    })


def test_compare_constructed_effect():
    rng = np.random.default_rng(5)
    tug = rng.normal(0.68, 0.1, 100)
    rows = compare_conditions(_cond_table(tug, 0.7 * rng.normal(0.68, 0.1, 100)))
    (row,) = rows
    assert row.feature == "speed" and row.tug.mean > row.daily.mean and row.mw.p_value < 0.01


def test_compare_order_missing_and_single_feature():
    rng = np.random.default_rng(6)
    t = pd.DataFrame({"condition": ["TUG"] * 20 + ["Daily"] * 20})
    for f in TABLE_ORDER:
        t[f] = rng.normal(size=40)
    t.loc[t.condition == "Daily", "pace"] = np.nan
    with pytest.warns(AnalysisWarning, match="pace: no usable values in Daily"):
        rows = compare_conditions(t)
    assert [r.feature for r in rows] == list(TABLE_ORDER)
    assert rows[1].mw is None and rows[1].daily is None
    assert len(compare_conditions(t, ["stride_freq"])) == 1
    with pytest.raises(ValueError, match="both TUG and Daily"):
        compare_conditions(t[t.condition == "TUG"])


def test_compare_null_mostly_non_significant():
    hits = 0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        t = pd.DataFrame({"condition": ["TUG"] * 60 + ["Daily"] * 60})
        for f in TABLE_ORDER:
            t[f] = rng.normal(size=120)
        rows = compare_conditions(t)
        hits += sum(r.mw.p_value > 0.05 for r in rows) >= 8
    assert hits >= 4


def test_compare_warns_on_shared_values():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        compare_conditions(_cond_table(np.array([1.0, 2, 3]), np.array([3.0, 4, 5])))
    assert any("approximate" in str(x.message) for x in w)
