"""Copula entropy by rank transform plus k-nearest-neighbour mutual information.

Copula entropy (CE) of a random vector is the negative mutual information
between its components, so it is zero for independent variables and more
negative the stronger the dependence. It is estimated in two steps:

1. map every column to pseudo-observations ``rank / (n + 1)`` (the
   empirical copula sample);
2. estimate mutual information of the pseudo-observations with the
   Kraskov-Stoegbauer-Grassberger estimator (first variant, max-norm).

All values are in nats.
"""
from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma
from scipy.stats import rankdata

__all__ = [
    "AnalysisWarning",
    "CEEstimate",
    "CONDITION_SUBSETS",
    "JITTER_MAGNITUDE",
    "copula_entropy",
    "dependence_with_score",
    "ksg_mutual_information",
    "knn_counts",
    "pearson_correlation",
    "rank_transform",
]

JITTER_MAGNITUDE = 1e-10
# jitter kicks in when a single tie block holds more than this share of rows
TIE_JITTER_SHARE = 0.01
CONDITION_SUBSETS = ("TUG", "Daily", "Both")
# relative tolerance for treating two distances as equal (rank-lattice ties)
TIE_RTOL = 1e-9


class AnalysisWarning(UserWarning):
    """Recoverable data problem (ties, too few rows, skipped outputs)."""


@dataclass(frozen=True)
class CEEstimate:
    value: float  # nats
    k: int
    n: int


def _as_matrix(data, k: int | None = None) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"expected an (n, d) matrix with d >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample matrix contains non-finite values")
    if k is not None and x.shape[0] < k + 2:
        raise ValueError(f"need at least k + 2 = {k + 2} rows, got {x.shape[0]}")
    return x


def rank_transform(data) -> np.ndarray:
    """Column-wise pseudo-observations ``rank / (n + 1)``; ties share the average rank."""
    x = _as_matrix(data)
    return rankdata(x, method="average", axis=0) / (x.shape[0] + 1)


# ---------------------------------------------------------------------------
# KSG
# ---------------------------------------------------------------------------

def _boundary(s: np.ndarray, pos: np.ndarray, pred) -> np.ndarray:
    """Move ``pos`` to the end of the prefix of sorted ``s`` where ``pred`` holds.

    ``pred(values, rows)`` must be monotone (true then false) along ``s``.
    Jumps whole blocks of equal values at a time.
    """
    n = s.size
    rows = np.arange(pos.size)
    while True:
        m = pos < n
        m[m] = pred(s[pos[m]], rows[m])
        if not m.any():
            break
        pos[m] = np.searchsorted(s, s[pos[m]], side="right")
    while True:
        m = pos > 0
        m[m] = ~pred(s[pos[m] - 1], rows[m])
        if not m.any():
            break
        pos[m] = np.searchsorted(s, s[pos[m] - 1], side="left")
    return pos


def _count_closer(x: np.ndarray, thr: np.ndarray) -> np.ndarray:
    """For each i, the number of j (self included) with ``|x[j] - x[i]| < thr[i]``.

    Uses the same floating-point comparison as a direct pairwise check,
    so results agree exactly with brute force.
    """
    s = np.sort(x)
    above = _boundary(s, np.searchsorted(s, x + thr, side="left"),
                      lambda v, r: (v - x[r]) < thr[r])
    below = _boundary(s, np.searchsorted(s, x - thr, side="left"),
                      lambda v, r: (x[r] - v) >= thr[r])
    return np.maximum(above - below, 0)


def _kth_neighbours(u: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """k-th neighbour radius, its tie band, and the neighbour's row.

    Joint distances within ``TIE_RTOL`` of the radius are ties; among tied
    candidates the lowest row index is taken as the k-th neighbour.
    """
    tree = cKDTree(u)
    dist, _ = tree.query(u, k=k + 1, p=np.inf)
    eps = dist[:, k]
    lo = eps * (1.0 - TIE_RTOL)
    hi = eps * (1.0 + TIE_RTOL)
    kth = np.empty(u.shape[0], dtype=int)
    for i, cand in enumerate(tree.query_ball_point(u, hi * (1.0 + 1e-12) + 1e-300, p=np.inf)):
        cand = np.asarray(cand, dtype=int)
        cand = cand[cand != i]
        d = np.max(np.abs(u[cand] - u[i]), axis=1)
        closer = int(np.sum(d < lo[i]))
        tied = np.sort(cand[(d >= lo[i]) & (d <= hi[i])])
        kth[i] = tied[k - 1 - closer]
    return eps, lo, hi, kth


def knn_counts(u, k: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Max-norm distance to the k-th neighbour and per-column neighbour counts.

    A point counts along coordinate ``j`` when its distance there is below
    the joint k-NN radius. On rank data many points sit exactly on that
    radius; each of those counts one half, except the k-th neighbour itself,
    which (as in the continuous case) is excluded. For tie-free data this is
    the textbook strict count.

    Returns
    -------
    eps : ndarray, shape (n,)
    counts : ndarray, shape (n, d)
        Neighbour counts, possibly half-integer.
    """
    u = _as_matrix(u, k)
    eps, lo, hi, kth = _kth_neighbours(u, k)
    rows = np.arange(u.shape[0])
    counts = np.empty(u.shape, dtype=float)
    for j in range(u.shape[1]):
        x = u[:, j]
        inside = _count_closer(x, lo) - (lo > 0)
        upto = _count_closer(x, np.nextafter(hi, np.inf)) - 1
        dk = np.abs(x[kth] - x[rows])
        kth_on_edge = (dk >= lo) & (dk <= hi)
        counts[:, j] = inside + 0.5 * (upto - inside - kth_on_edge)
    return eps, counts


def ksg_mutual_information(u, k: int = 3) -> float:
    """KSG estimate (algorithm 1) of the mutual information among the columns of ``u``.

    ``psi(k) + (d - 1) psi(n) - < sum_j psi(n_j + 1) >`` where ``n_j`` counts
    neighbours within the joint k-NN max-norm radius along coordinate ``j``
    (see :func:`knn_counts` for how exact distance ties are counted).
    """
    u = _as_matrix(u, k)
    n, d = u.shape
    eps, counts = knn_counts(u, k)
    if np.any(eps == 0):
        warnings.warn(
            f"{int(np.sum(eps == 0))} point(s) have {k} or more exact duplicates; "
            "estimate is biased (consider jitter)",
            AnalysisWarning, stacklevel=2,
        )
    marginal = digamma(counts + 1.0).sum(axis=1)
    return float(digamma(k) + (d - 1) * digamma(n) - np.mean(marginal))


# ---------------------------------------------------------------------------
# copula entropy
# ---------------------------------------------------------------------------

def _max_tie_block(col: np.ndarray) -> int:
    _, counts = np.unique(col, return_counts=True)
    return int(counts.max())


def _jitter_ties(u: np.ndarray, seed: int) -> np.ndarray:
    u = u.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        _, inverse, counts = np.unique(col, return_inverse=True, return_counts=True)
        tied = counts[inverse] > 1
        if not tied.any():
            continue
        # seeded from the column content, so swapping columns swaps the jitter too
        rng = np.random.default_rng([seed, zlib.crc32(col.tobytes())])
        noise = rng.uniform(-JITTER_MAGNITUDE, JITTER_MAGNITUDE, size=col.size)
        u[tied, j] = col[tied] + noise[tied]
    return u


def copula_entropy(data, k: int = 3, jitter: bool = True, seed: int = 0) -> CEEstimate:
    """Estimate the copula entropy of the columns of ``data``.

    Parameters
    ----------
    data : array_like, shape (n, d)
        Observations in rows, d >= 2 variables in columns.
    k : int
        Neighbour count for the KSG step.
    jitter : bool
        Break ties with seeded noise of magnitude 1e-10 when any tie block
        covers more than 1% of the rows. Exact ties otherwise produce zero
        neighbour distances.
    seed : int
        Seed for the jitter.
    """
    x = _as_matrix(data, k)
    n = x.shape[0]
    u = rank_transform(x)
    blocks = [_max_tie_block(u[:, j]) for j in range(u.shape[1])]
    if max(blocks) > 1:
        heavy = max(blocks) > TIE_JITTER_SHARE * n
        action = "jittered" if (jitter and heavy) else "left as average ranks"
        warnings.warn(
            f"tied values (largest tie block {max(blocks)} of {n} rows) {action}",
            AnalysisWarning, stacklevel=2,
        )
        if jitter and heavy:
            u = _jitter_ties(u, seed)
    return CEEstimate(-ksg_mutual_information(u, k), k, n)


def dependence_with_score(
    table,
    score_column: str = "tug_score",
    features: Sequence[str] | None = None,
    conditions: Iterable[str] = CONDITION_SUBSETS,
    k: int = 3,
    min_rows: int = 30,
    seed: int = 0,
) -> list[tuple[str, str, CEEstimate]]:
    """CE between each feature and the outcome score, per condition subset.

    ``table`` is a DataFrame with a ``condition`` column holding ``TUG`` or
    ``Daily``; the subset ``Both`` pools the two. Features with fewer than
    ``min_rows`` complete rows in a subset are skipped with a warning.
    """
    from .features import FEATURE_NAMES

    features = list(FEATURE_NAMES if features is None else features)
    out = []
    for feature in features:
        for cond in conditions:
            sub = table if cond == "Both" else table[table["condition"] == cond]
            pair = sub[[feature, score_column]].dropna()
            if len(pair) < max(min_rows, k + 2):
                warnings.warn(
                    f"CE({feature}, {score_column}) skipped for {cond}: "
                    f"{len(pair)} complete rows < {min_rows}",
                    AnalysisWarning, stacklevel=2,
                )
                continue
            est = copula_entropy(pair.to_numpy(dtype=float), k=k, seed=seed)
            out.append((feature, cond, est))
    return out


def pearson_correlation(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if x.size < 2:
        raise ValueError("correlation needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for constant input")
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))
