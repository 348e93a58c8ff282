"""Estimators for samples drawn from a sampling distribution p' != p.

Each draw carries x = p(w) (target) and y = p'(w) (sampling). Inclusion in
the observed set is governed by p', so every inclusion probability below is
1 - (1 - p')**n.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ._kernel import inclusion_bilinear, inclusion_prob, inclusion_variance_hat
from .estimators import _harmonic_jackknife
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

PI0_IS = "pi0_is"
PI1_IS = "pi1_is"
PI2_IS = "pi2_is"


def _require_is(sample: ProbabilitySample) -> None:
    if sample.n < 1:
        raise SampleError("empty sample")
    if not sample.has_sampling_probs:
        raise SampleError("importance-sampling estimators need y on every draw")


def likelihood_ratios(sample: ProbabilitySample) -> np.ndarray:
    return np.array([d.x / d.y for d in sample.draws], dtype=float)


def _in_event(sample: ProbabilitySample, event: Event):
    x = np.array([d.x for d in sample.draws if d.outcome in event.members], dtype=float)
    y = np.array([d.y for d in sample.draws if d.outcome in event.members], dtype=float)
    return x, y


def pi0_is(sample: ProbabilitySample, event: Event) -> EstimateReport:
    """Self-normalized ratio sum_{i in A} z_i / sum_i z_i with z = x/y."""
    _require_is(sample)
    z = likelihood_ratios(sample)
    in_a = np.array([d.outcome in event.members for d in sample.draws])
    est = math.fsum(z[in_a]) / math.fsum(z)
    return EstimateReport(
        PI0_IS, est, None, sample.n, int(in_a.sum()), ("self-normalized; asymptotically unbiased",)
    )


def pi1_is(
    sample: ProbabilitySample,
    event: Event,
    excluded_mass: float = 0.0,
) -> EstimateReport:
    """sum over distinct observed w in A of p(w) / (1 - (1 - p'(w))**n).

    ``excluded_mass`` is the target mass of event outcomes the design never
    samples; the estimate is then biased low by that amount and a note says so.
    """
    _require_is(sample)
    n = sample.n
    obs = [d for d in observed_set(sample) if d.outcome in event.members]
    x = np.array([d.x for d in obs], dtype=float)
    y = np.array([d.y for d in obs], dtype=float)
    est = math.fsum(x / inclusion_prob(y, n)) if len(x) else 0.0
    notes = ()
    if excluded_mass > 0:
        notes = (f"design excludes event mass {excluded_mass!r}; estimate biased low",)
    return EstimateReport(
        PI1_IS, est, inclusion_variance_hat(x, y, n), n, sample.k(event), notes
    )


def _sampling_prob(design, outcome: int) -> float:
    if isinstance(design, DiscreteDistribution):
        return design.p(outcome) if outcome in design else 0.0
    if isinstance(design, SamplingDesign):
        return design.weights.get(outcome, 0.0)
    return float(design.get(outcome, 0.0))


def v1_is_exact(
    dist: DiscreteDistribution,
    design: DiscreteDistribution | SamplingDesign | Mapping[int, float],
    event: Event,
    n: int,
) -> float:
    """Exact variance of :func:`pi1_is` under n iid draws from ``design``.

    Event outcomes with zero sampling probability are never observed and drop
    out; the estimator then targets only the covered mass.
    """
    pairs = [(dist.p(o), _sampling_prob(design, o)) for o in event.members]
    pairs = [(p, s) for p, s in pairs if s > 0 and p > 0]
    p = np.array([t[0] for t in pairs], dtype=float)
    s = np.array([t[1] for t in pairs], dtype=float)
    ones = np.ones_like(p)
    return inclusion_bilinear(p, s, ones, ones, n)


def v1_is_hat(sample: ProbabilitySample, event: Event) -> float:
    _require_is(sample)
    obs = [d for d in observed_set(sample) if d.outcome in event.members]
    x = np.array([d.x for d in obs], dtype=float)
    y = np.array([d.y for d in obs], dtype=float)
    return inclusion_variance_hat(x, y, sample.n)


def pi2_is(sample: ProbabilitySample, event: Event, m: int | None = None) -> EstimateReport:
    """m * Z / W with Z = sum z_i and W = sum 1/y_i over in-event draws."""
    _require_is(sample)
    m = event.m if m is None else m
    x, y = _in_event(sample, event)
    k = len(x)
    if k == 0:
        raise NoInformationError("pi2 undefined: no draw in the event")
    z, w = x / y, 1.0 / y
    est = m * math.fsum(z) / math.fsum(w)
    var = _harmonic_jackknife(z, w, m, False) if k >= 2 else None
    return EstimateReport(PI2_IS, est, var, sample.n, k)


def v2_is_jackknife(
    sample: ProbabilitySample, event: Event, m: int | None = None, approximate: bool = False
) -> float:
    _require_is(sample)
    m = event.m if m is None else m
    x, y = _in_event(sample, event)
    if len(x) < 2:
        raise InsufficientDataError("jackknife needs at least two in-event draws")
    return _harmonic_jackknife(x / y, 1.0 / y, m, approximate)


# -- sampling design ---------------------------------------------------------------


@dataclass(frozen=True)
class SamplingDesign:
    """Sampling distribution concentrated on the most likely outcomes of an event.

    weights maps each supported outcome to p'(w); alpha is the smallest target
    probability kept in the support and C the normalization constant of
    p'(w) = 1 - C p(w)**(-2/(n-1)).
    """

    weights: dict[int, float]
    alpha: float
    C: float
    n: int
    objective: float
    exact_v1: float
    excluded_mass: float
    feasible_sizes: tuple[int, ...]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.weights)

    def as_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(tuple(self.weights), tuple(self.weights.values()))


def design_objective(dist: DiscreteDistribution, event: Event, weights: Mapping[int, float], n: int) -> float:
    """Large-n proxy for v1: sum over A of p**2 (1 - p')**n."""
    terms = [dist.p(o) ** 2 * (1.0 - weights.get(o, 0.0)) ** n for o in event.members]
    return math.fsum(terms)


def _candidate(p_sorted: np.ndarray, j: int, n: int) -> tuple[np.ndarray, float]:
    e = p_sorted[:j] ** (-2.0 / (n - 1))
    C = (j - 1) / math.fsum(e)
    return 1.0 - C * e, C


def optimal_design(dist: DiscreteDistribution, event: Event, n: int) -> SamplingDesign:
    """Design p' minimizing sum_A p**2 (1-p')**n over distributions on A.

    The first-order condition makes p**2 (1-p')**(n-1) constant on the support,
    i.e. p' = 1 - C p**(-2/(n-1)). Candidate supports are the j most likely
    outcomes (ties broken by outcome id); the largest j whose weights are all
    nonnegative is kept.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    members = sorted((o for o in event.members if dist.p(o) > 0), key=lambda o: (-dist.p(o), o))
    if not members:
        raise ValueError("event must contain an outcome of positive probability")
    p_sorted = np.array([dist.p(o) for o in members], dtype=float)
    feasible = []
    for j in range(1, len(members) + 1):
        w, _ = _candidate(p_sorted, j, n)
        if np.all(w >= 0):
            feasible.append(j)
    j = feasible[-1]
    w, C = _candidate(p_sorted, j, n)
    # rounding can leave the weights a few ulps off a unit sum
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    weights = {o: float(v) for o, v in zip(members[:j], w)}
    excluded = math.fsum(dist.p(o) for o in event.members if o not in weights)
    return SamplingDesign(
        weights=weights,
        alpha=float(p_sorted[j - 1]),
        C=C,
        n=n,
        objective=design_objective(dist, event, weights, n),
        exact_v1=v1_is_exact(dist, weights, event, n),
        excluded_mass=excluded,
        feasible_sizes=tuple(feasible),
    )


def warn_if_uncovered(design: SamplingDesign) -> None:
    if design.excluded_mass > 0:
        warnings.warn(
            f"design leaves event mass {design.excluded_mass:.3g} unsampled; pi1_is is biased low",
            stacklevel=2,
        )


def write_design(design: SamplingDesign, dist: DiscreteDistribution, event: Event, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["outcome_id", "p", "p_prime"])
        for o in sorted(event.members, key=lambda o: (-dist.p(o), o)):
            writer.writerow([o, repr(dist.p(o)), repr(design.weights.get(o, 0.0))])
