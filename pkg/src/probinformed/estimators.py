"""Estimators of event probabilities and means from probability-annotated samples.

Draws come from the target distribution itself here; see
:mod:`probinformed.importance` for samples from a different sampling
distribution. Every estimator is a pure function of ``(sample, event)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._kernel import inclusion_bilinear, inclusion_prob, inclusion_variance_hat, miss_prob
from .sample_space import (
    DiscreteDistribution,
    EstimateReport,
    Event,
    InsufficientDataError,
    NoInformationError,
    ProbabilitySample,
    SampleError,
    observed_set,
)

PI0 = "pi0"
PI0_MAX = "pi0_max"
PI1 = "pi1"
PI1_DUAL = "pi1_dual"
PI1_COMBINED = "pi1_combined"
PI1_CV = "pi1_cv"
PI2 = "pi2"
MU1 = "mu1"


@dataclass(frozen=True)
class EqualMassSpec:
    """Event of ``m`` outcomes each carrying probability ``pi / m``."""

    pi: float
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not 0.0 <= self.pi <= 1.0 or self.pi / self.m > 1.0:
            raise ValueError("need 0 <= pi <= 1 and pi/m <= 1")


@dataclass(frozen=True)
class MeanProblem:
    """Observable ``values`` (outcome -> real) and a fixed reference point ``xi``."""

    values: Mapping[int, float]
    xi: float = 0.0


def _require_draws(sample: ProbabilitySample) -> None:
    if sample.n < 1:
        raise SampleError("empty sample")


def _split_observed(sample: ProbabilitySample, event: Event):
    obs = observed_set(sample)
    inside = np.array([d.x for d in obs if d.outcome in event.members], dtype=float)
    outside = np.array([d.x for d in obs if d.outcome not in event.members], dtype=float)
    return inside, outside


def _weighted_inverse_inclusion(x: np.ndarray, n: int) -> float:
    if len(x) == 0:
        return 0.0
    return math.fsum(x / inclusion_prob(x, n))


# -- relative frequency -----------------------------------------------------------


def pi0(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """Relative frequency k/n with plug-in variance k/n (1 - k/n) / n."""
    _require_draws(sample)
    n, k = sample.n, sample.k(event)
    est = k / n
    return EstimateReport(PI0, est, est * (1.0 - est) / n, n, k)


def v0_exact(pi: float, n: int) -> float:
    return pi * (1.0 - pi) / n


def pi0_max(sample: ProbabilitySample, event: Event) -> EstimateReport:
    _require_draws(sample)
    n, k = sample.n, sample.k(event)
    inside, _ = _split_observed(sample, event)
    seen_mass = math.fsum(inside)
    return EstimateReport(
        PI0_MAX,
        max(k / n, seen_mass),
        None,
        n,
        k,
        ("biased: max of relative frequency and observed in-event mass",),
    )


# -- inverse inclusion probability ------------------------------------------------


def pi1(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """Sum of p(w) / (1 - q(w)**n) over distinct observed outcomes in the event.

    n is the full sample size. The variance estimate is :func:`v1_hat`, which
    can be negative on individual samples.
    """
    _require_draws(sample)
    n = sample.n
    inside, _ = _split_observed(sample, event)
    est = _weighted_inverse_inclusion(inside, n)
    return EstimateReport(PI1, est, inclusion_variance_hat(inside, inside, n), n, sample.k(event))


def v1_exact(dist: DiscreteDistribution, event: Event, n: int) -> float:
    """Exact variance of :func:`pi1` for samples of size n from ``dist``."""
    p = np.array([dist.p(o) for o in event.members if dist.p(o) > 0], dtype=float)
    ones = np.ones_like(p)
    return inclusion_bilinear(p, p, ones, ones, n)


def v1_asymptotic_bound(dist: DiscreteDistribution, event: Event, n: int) -> tuple[float, float]:
    """Large-n approximation of v1 and its upper bound.

    approx = sum_{w,w' in A} p p' (1-p-p')**n + sum_A p**2 q**n
    bound  = m**2 pmax**2 (1-2 pmin)**n + m pmax**2 (1-pmin)**n

    The bound dominates the approximation only when pmin <= 1/2.
    """
    p = np.array([dist.p(o) for o in event.members], dtype=float)
    if len(p) == 0:
        raise ValueError("event must be nonempty")
    m = len(p)
    pair_base = 1.0 - p[:, None] - p[None, :]
    approx = float(np.sum(np.outer(p, p) * pair_base**n) + np.sum(p * p * miss_prob(p, n)))
    lo, hi = float(p.min()), float(p.max())
    bound = m * m * hi * hi * (1.0 - 2.0 * lo) ** n + m * hi * hi * (1.0 - lo) ** n
    return approx, bound


def v1_equal_mass(spec: EqualMassSpec) -> float:
    """Closed-form v1 when the event mass pi is spread evenly over m outcomes."""
    pi, m, n = spec.pi, spec.m, spec.n
    if pi == 0.0:
        return 0.0
    theta = pi / m
    miss = (1.0 - theta) ** n
    num = (m - 1) * (1.0 - 2.0 * theta) ** n - m * miss * miss + miss
    return pi * pi * num / (m * (1.0 - miss) ** 2)


def est_sum_p2qn(sample: ProbabilitySample, event: Event) -> float:
    """Unbiased estimate of sum_{w in A} p(w)**2 q(w)**n."""
    _require_draws(sample)
    n = sample.n
    inside, _ = _split_observed(sample, event)
    if len(inside) == 0:
        return 0.0
    return math.fsum(inside**2 * miss_prob(inside, n) / inclusion_prob(inside, n))


def v1_hat(sample: ProbabilitySample, event: Event) -> float:
    """Unbiased estimate of v1; may be negative on unlucky samples."""
    _require_draws(sample)
    inside, _ = _split_observed(sample, event)
    return inclusion_variance_hat(inside, inside, sample.n)


def pi1_dual(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """1 minus the inverse-inclusion estimate of the complement's mass."""
    _require_draws(sample)
    n = sample.n
    _, outside = _split_observed(sample, event)
    est = 1.0 - _weighted_inverse_inclusion(outside, n)
    var = inclusion_variance_hat(outside, outside, n)
    return EstimateReport(PI1_DUAL, est, var, n, sample.k(event))


def pi1_combined(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """Inverse-variance weighting of pi0, pi1 and pi1_dual using estimated variances.

    Components whose variance estimate is non-finite or <= 0 are dropped.
    The reported variance is 1 / sum(1/v), which assumes independent
    components and is only indicative.
    """
    parts = [pi0(sample, event), pi1(sample, event), pi1_dual(sample, event)]
    usable = [
        r
        for r in parts
        if r.variance_estimate is not None
        and math.isfinite(r.variance_estimate)
        and r.variance_estimate > 0
    ]
    n, k = sample.n, sample.k(event)
    dropped = tuple(f"dropped {r.estimator_id}" for r in parts if r not in usable)
    if not usable:
        fallback = parts[1]
        return EstimateReport(
            PI1_COMBINED,
            fallback.estimate,
            fallback.variance_estimate,
            n,
            k,
            ("all variance estimates degenerate; fell back to pi1",),
        )
    inv = [1.0 / r.variance_estimate for r in usable]
    total = math.fsum(inv)
    est = math.fsum(r.estimate * w for r, w in zip(usable, inv)) / total
    return EstimateReport(PI1_COMBINED, est, 1.0 / total, n, k, dropped)


# -- mean estimation ---------------------------------------------------------------


def mu1(sample: ProbabilitySample, problem: MeanProblem) -> EstimateReport:
    """xi + sum over distinct observed w of p(w) (X(w) - xi) / (1 - q(w)**n)."""
    _require_draws(sample)
    n = sample.n
    obs = observed_set(sample)
    x = np.array([d.x for d in obs], dtype=float)
    vals = np.array([problem.values[d.outcome] for d in obs], dtype=float)
    terms = x * (vals - problem.xi) / inclusion_prob(x, n)
    est = problem.xi + math.fsum(terms)
    return EstimateReport(MU1, est, None, n, n)


def _mean_arrays(dist: DiscreteDistribution, values: Mapping[int, float]):
    keep = [o for o in dist.outcomes if dist.p(o) > 0]
    p = np.array([dist.p(o) for o in keep], dtype=float)
    vals = np.array([values[o] for o in keep], dtype=float)
    return p, vals


def mu1_variance(dist: DiscreteDistribution, values: Mapping[int, float], n: int, xi: float) -> float:
    """Exact variance of :func:`mu1` at a fixed reference point xi."""
    p, vals = _mean_arrays(dist, values)
    centred = vals - xi
    return inclusion_bilinear(p, p, centred, centred, n)


def optimal_xi(
    dist: DiscreteDistribution,
    values: Mapping[int, float],
    n: int,
    validate: bool = False,
) -> float:
    """Reference point minimizing the variance of :func:`mu1`.

    The variance is a quadratic (X - xi)' M (X - xi), so the minimizer is
    1'MX / 1'M1. With ``validate`` the result is checked against a numeric
    minimization of the enumerated variance; on disagreement the numeric
    value wins.
    """
    p, vals = _mean_arrays(dist, values)
    ones = np.ones_like(p)
    denom = inclusion_bilinear(p, p, ones, ones, n)
    if not denom > 0:
        raise ValueError("degenerate problem: total observed weight has zero variance")
    xi = inclusion_bilinear(p, p, ones, vals, n) / denom
    if validate:
        from .oracle import numeric_optimal_xi

        numeric = numeric_optimal_xi(dist, values, n)
        if not math.isclose(xi, numeric, rel_tol=1e-7, abs_tol=1e-9):
            return numeric
    return xi


def pi1_cv(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """pi1 corrected by the control variate (1 - sum_O p / (1 - q**n)) * pi0.

    Not exactly unbiased: the coefficient pi0 is estimated from the same draws.
    """
    _require_draws(sample)
    n, k = sample.n, sample.k(event)
    inside, outside = _split_observed(sample, event)
    base = _weighted_inverse_inclusion(inside, n)
    total = base + _weighted_inverse_inclusion(outside, n)
    est = base + (1.0 - total) * (k / n)
    return EstimateReport(PI1_CV, est, None, n, k, ("reference point estimated from sample",))


# -- harmonic mean -----------------------------------------------------------------


def _in_event_x(sample: ProbabilitySample, event: Event) -> np.ndarray:
    return np.array([d.x for d in sample.draws if d.outcome in event.members], dtype=float)


def _harmonic_jackknife(z: np.ndarray, w: np.ndarray, m: int, approximate: bool) -> float:
    """Leave-one-out variance of m * sum(z) / sum(w), scaled by m**2."""
    k = len(z)
    ratio = z / w
    if np.all(ratio == ratio[0]):
        # every leave-one-out estimate equals the full one; skip the rounding noise
        return 0.0
    Z, W = math.fsum(z), math.fsum(w)
    xi = Z / W
    if approximate:
        # large-k linearization; for z == 1 this is (k-1)/k**3 sum (1 - xi/x)**2 xi**2
        dev = (z - xi * w) / W
        return m * m * (k - 1) / k * float(np.sum(dev**2))
    loo = (Z - z) / (W - w)
    return m * m * (k - 1) / k * math.fsum((xi - loo) ** 2)


def pi2(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """m times the harmonic mean of the in-event draw probabilities.

    Raises NoInformationError when no draw lies in the event.
    """
    _require_draws(sample)
    x = _in_event_x(sample, event)
    k = len(x)
    if k == 0:
        raise NoInformationError("pi2 undefined: no draw in the event")
    est = event.m * k / math.fsum(1.0 / x)
    var = _harmonic_jackknife(np.ones(k), 1.0 / x, event.m, False) if k >= 2 else None
    return EstimateReport(PI2, est, var, sample.n, k)


def v2_exact(dist: DiscreteDistribution, event: Event, k: int) -> float:
    """Delta-method variance of pi2 given k in-event draws (a large-k approximation)."""
    if k < 1:
        raise ValueError("k must be positive")
    p = np.array([dist.p(o) for o in event.members], dtype=float)
    if np.any(p == 0):
        return math.inf
    m = len(p)
    pi = math.fsum(p)
    # sum_A 1/p' with p' = p/pi
    inv_cond = pi * math.fsum(1.0 / p)
    return pi * pi / (m * m * k) * (inv_cond - m * m)


def v2_jackknife(sample: ProbabilitySample, event: Event, approximate: bool = False) -> float:
    """Jackknife estimate of Var(pi2); ``approximate`` selects the large-k form."""
    x = _in_event_x(sample, event)
    if len(x) < 2:
        raise InsufficientDataError("jackknife needs at least two in-event draws")
    return _harmonic_jackknife(np.ones(len(x)), 1.0 / x, event.m, approximate)
