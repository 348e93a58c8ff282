"""Independent exact-rational references used to freeze expected test values.

Nothing here imports the package under test: samples are enumerated with
Fractions and every estimator is re-derived from its defining formula.
"""

from __future__ import annotations

import itertools
from fractions import Fraction as F


def enumerate_tuples(p, n, sampling=None):
    """Yield (weight, tuple of outcome indices) over all ordered n-tuples."""
    s = p if sampling is None else sampling
    for combo in itertools.product(range(len(p)), repeat=n):
        w = F(1)
        for i in combo:
            w *= s[i]
        if w:
            yield w, combo


def pi1_value(p, A, n, combo, sampling=None):
    s = p if sampling is None else sampling
    return sum((p[i] / (1 - (1 - s[i]) ** n) for i in set(combo) if i in A), F(0))


def moments(p, n, f, sampling=None):
    """Exact mean and variance of f(combo) under n iid draws."""
    pairs = list(enumerate_tuples(p, n, sampling))
    mean = sum(w * f(c) for w, c in pairs)
    var = sum(w * (f(c) - mean) ** 2 for w, c in pairs)
    return mean, var


def v1_reference(p, A, n, sampling=None):
    return moments(p, n, lambda c: pi1_value(p, A, n, c, sampling), sampling)[1]
