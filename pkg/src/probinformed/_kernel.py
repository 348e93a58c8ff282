"""Numerics shared by the inclusion-probability estimators.

All powers (1 - s)**n go through log1p/expm1 so that the large-n, small-s
regime keeps full relative precision.
"""

from __future__ import annotations

import math

import numpy as np

# below this many observed outcomes the scalar loop beats numpy's call overhead
_SCALAR_MAX = 16


def miss_prob(s, n: int):
    """(1 - s)**n: probability that an outcome of sampling probability s is never drawn."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return np.exp(n * np.log1p(-s))


def inclusion_prob(s, n: int):
    """1 - (1 - s)**n: probability that the outcome appears at least once."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return -np.expm1(n * np.log1p(-s))


def pair_miss_excess(s1, s2, n: int):
    """P(neither drawn) - P(first missed) P(second missed) for two distinct outcomes.

    Equals (1-s1-s2)**n - (1-s1)**n (1-s2)**n, evaluated as
    (1-s1)**n (1-s2)**n expm1(n log1p(-s1 s2 / ((1-s1)(1-s2)))) to avoid the
    catastrophic cancellation of the direct difference when s1 s2 is tiny.
    """
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    qq = (1.0 - s1) * (1.0 - s2)
    prod_miss = miss_prob(s1, n) * miss_prob(s2, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.minimum(np.where(qq > 0, s1 * s2 / qq, 1.0), 1.0)
        stable = prod_miss * np.expm1(n * np.log1p(-ratio))
    direct = np.clip(1.0 - s1 - s2, 0.0, None) ** n - prod_miss
    return np.where(qq > 0, stable, direct)


def _pair_miss_excess_scalar(s1: float, s2: float, n: int) -> float:
    qq = (1.0 - s1) * (1.0 - s2)
    m1 = math.exp(n * math.log1p(-s1)) if s1 < 1 else 0.0
    m2 = math.exp(n * math.log1p(-s2)) if s2 < 1 else 0.0
    if qq > 0:
        ratio = min(s1 * s2 / qq, 1.0)
        return m1 * m2 * math.expm1(n * math.log1p(-ratio)) if ratio < 1 else -m1 * m2
    return max(1.0 - s1 - s2, 0.0) ** n - m1 * m2


def _variance_hat_scalar(x: list[float], s: list[float], n: int) -> float:
    a = [-math.expm1(n * math.log1p(-si)) if si < 1 else 1.0 for si in s]
    qn = [math.exp(n * math.log1p(-si)) if si < 1 else 0.0 for si in s]
    terms = []
    for i in range(len(x)):
        terms.append(x[i] * x[i] * qn[i] / (a[i] * a[i]))
        for j in range(len(x)):
            if j == i:
                continue
            delta = _pair_miss_excess_scalar(s[i], s[j], n)
            both = a[i] * a[j] + delta
            if both > 0:
                terms.append(x[i] * x[j] * delta / (a[i] * a[j] * both))
    return math.fsum(terms)


def _grouped(columns: list[np.ndarray]) -> tuple[list[np.ndarray], np.ndarray]:
    """Collapse identical rows; returns the unique columns and multiplicities."""
    if len(columns[0]) == 0:
        return [c[:0] for c in columns], np.zeros(0)
    stacked = np.column_stack(columns)
    uniq, counts = np.unique(stacked, axis=0, return_counts=True)
    return [uniq[:, i] for i in range(uniq.shape[1])], counts.astype(float)


def inclusion_bilinear(p, s, u, v, n: int, counts=None) -> float:
    """Covariance of sum_{w in O} p(w) u(w) / P(w in O) with its analogue in v.

    ``p`` are target probabilities, ``s`` the sampling probabilities that govern
    inclusion in the observed set O after n iid draws; u, v are per-outcome
    values. Outcomes with s == 0 are never observed and must be excluded by the
    caller. Identical (p, s, u, v) rows are merged first, so spaces with few
    distinct probability values cost O(groups**2) instead of O(size**2).
    """
    cols = [np.asarray(c, dtype=float) for c in (p, s, u, v)]
    if counts is None:
        (p, s, u, v), counts = _grouped(cols)
    else:
        p, s, u, v = cols
        counts = np.asarray(counts, dtype=float)
    if len(p) == 0:
        return 0.0
    a = inclusion_prob(s, n)
    qn = miss_prob(s, n)
    # diagonal: Var(1_O(w)) = a (1 - a)
    diag = float(np.sum(counts * p * p * u * v * qn / a))
    pair_counts = np.outer(counts, counts) - np.diag(counts)
    delta = pair_miss_excess(s[:, None], s[None, :], n)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = (
            np.outer(p * u, p * v) * delta / np.outer(a, a)
        )
        off = float(np.sum(np.where(pair_counts > 0, pair_counts * terms, 0.0)))
    return diag + off


def inclusion_variance_hat(x, s, n: int) -> float:
    """Unbiased estimate of Var(sum_{O∩A} x / P(in O)) from the observed set.

    Each population covariance term is divided by the probability that its
    pair (or single outcome) is observed.
    """
    if len(x) == 0:
        return 0.0
    if len(x) <= _SCALAR_MAX:
        return _variance_hat_scalar([float(v) for v in x], [float(v) for v in s], n)
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    (x, s), counts = _grouped([x, s])
    a = inclusion_prob(s, n)
    qn = miss_prob(s, n)
    diag = float(np.sum(counts * x * x * qn / (a * a)))
    pair_counts = np.outer(counts, counts) - np.diag(counts)
    delta = pair_miss_excess(s[:, None], s[None, :], n)
    both = np.outer(a, a) + delta
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.outer(x, x) * delta / (np.outer(a, a) * both)
        # pairs never observed together (n = 1) contribute nothing
        off = float(np.sum(np.where((pair_counts > 0) & (both > 0), pair_counts * terms, 0.0)))
    return diag + off
