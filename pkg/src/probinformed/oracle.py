"""Exhaustive-enumeration oracles for estimator moments on small spaces.

Every ordered n-tuple of outcomes is visited and weighted by its exact
probability, so means and variances are exact up to rounding. These are the
ground truth the closed-form variance formulas are checked against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterator, Mapping

import numpy as np
from scipy import optimize

from .estimators import MeanProblem, mu1
from .sample_space import (
    DiscreteDistribution,
    Draw,
    EstimateReport,
    Event,
    InsufficientDataError,
    NoInformationError,
    ProbabilitySample,
)

MAX_TUPLES = 10**8

Estimator = Callable[[ProbabilitySample, Event], "float | EstimateReport"]


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumerationBudget:
    max_tuples: int = 10**6

    def __post_init__(self):
        if not 0 <= self.max_tuples <= MAX_TUPLES:
            raise ValueError(f"max_tuples must lie in [0, {MAX_TUPLES}]")


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    bias: float
    defined_fraction: float
    total_weight: float

    def to_dict(self, estimator: str, n: int) -> dict:
        out = {"estimator": estimator, "n": n}
        out.update(asdict(self))
        return out


def exact_pi(dist: DiscreteDistribution, event: Event) -> float:
    return math.fsum(dist.p(o) for o in dist.outcomes if o in event.members)


def enumerate_samples(
    target: DiscreteDistribution,
    n: int,
    sampling: DiscreteDistribution | None = None,
    budget: EnumerationBudget = EnumerationBudget(),
) -> Iterator[tuple[float, ProbabilitySample]]:
    """Yield (probability, sample) for every ordered n-tuple of draws.

    Draws follow ``sampling`` (default: ``target``); every draw carries x from
    the target and, when ``sampling`` is given, y from the sampling measure.
    """
    source = target if sampling is None else sampling
    support = [o for o in source.outcomes if source.p(o) > 0]
    size = len(support) ** n
    if size > budget.max_tuples:
        raise BudgetExceeded(f"{size} tuples exceed budget {budget.max_tuples}")
    if sampling is None:
        draws = [Draw(o, target.p(o)) for o in support]
    else:
        draws = [Draw(o, target.p(o), sampling.p(o)) for o in support]
    probs = [source.p(o) for o in support]
    for combo in itertools.product(range(len(support)), repeat=n):
        weight = math.prod(probs[i] for i in combo)
        yield weight, ProbabilitySample(tuple(draws[i] for i in combo))


def _value(result) -> float:
    return result.estimate if isinstance(result, EstimateReport) else float(result)


def estimator_moments_many(
    target: DiscreteDistribution,
    event: Event,
    n: int,
    estimators: Mapping[str, Estimator],
    sampling: DiscreteDistribution | None = None,
    truths: Mapping[str, float] | None = None,
    budget: EnumerationBudget = EnumerationBudget(),
) -> dict[str, Moments]:
    """:func:`estimator_moments` for several estimators over one enumeration."""
    names = list(estimators)
    weights = {k: [] for k in names}
    values = {k: [] for k in names}
    all_weights = []
    for w, sample in enumerate_samples(target, n, sampling, budget):
        all_weights.append(w)
        for name in names:
            try:
                v = _value(estimators[name](sample, event))
            except (NoInformationError, InsufficientDataError):
                continue
            weights[name].append(w)
            values[name].append(v)
    total = math.fsum(all_weights)
    default_truth = exact_pi(target, event)
    out = {}
    for name in names:
        truth = default_truth if truths is None or name not in truths else truths[name]
        defined = math.fsum(weights[name])
        if defined == 0:
            out[name] = Moments(math.nan, math.nan, math.nan, 0.0, total)
            continue
        w = np.asarray(weights[name])
        v = np.asarray(values[name])
        mean = math.fsum(w * v) / defined
        var = math.fsum(w * (v - mean) ** 2) / defined
        out[name] = Moments(mean, var, mean - truth, defined / total, total)
    return out


def estimator_moments(
    target: DiscreteDistribution,
    event: Event,
    n: int,
    estimator: Estimator,
    sampling: DiscreteDistribution | None = None,
    truth: float | None = None,
    budget: EnumerationBudget = EnumerationBudget(),
) -> Moments:
    """Exact mean and variance of ``estimator`` over all samples of size n.

    Samples on which the estimator raises NoInformationError or
    InsufficientDataError are excluded; moments are then conditional on
    definedness and ``defined_fraction`` is the probability of that.
    ``bias`` is mean - truth, with truth defaulting to the event probability.
    """
    truths = None if truth is None else {"est": truth}
    return estimator_moments_many(
        target, event, n, {"est": estimator}, sampling, truths, budget
    )["est"]


def variance_of_mu1_at_xi(
    dist: DiscreteDistribution,
    values: Mapping[int, float],
    n: int,
    xi: float,
    budget: EnumerationBudget = EnumerationBudget(),
) -> float:
    problem = MeanProblem(values, xi)
    mom = estimator_moments(
        dist, Event.of(()), n, lambda s, _e: mu1(s, problem), budget=budget
    )
    return mom.variance


def numeric_optimal_xi(
    dist: DiscreteDistribution,
    values: Mapping[int, float],
    n: int,
    budget: EnumerationBudget = EnumerationBudget(),
) -> float:
    """argmin over xi of the enumerated Var(mu1): grid scan, then Brent refinement.

    mu1 is affine in xi, so one enumeration records its intercept and slope
    on every tuple; the variance at any xi is then a weighted sum over tuples.
    """
    vals = [values[o] for o in dist.outcomes]
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return float(lo)
    weights, intercept, slope = [], [], []
    at0, at1 = MeanProblem(values, 0.0), MeanProblem(values, 1.0)
    for w, sample in enumerate_samples(dist, n, budget=budget):
        a = mu1(sample, at0).estimate
        weights.append(w)
        intercept.append(a)
        slope.append(mu1(sample, at1).estimate - a)
    w = np.asarray(weights)
    a = np.asarray(intercept)
    b = np.asarray(slope)

    def variance(xi: float) -> float:
        est = a + xi * b
        mean = math.fsum(w * est)
        return math.fsum(w * (est - mean) ** 2)

    span = hi - lo
    grid = np.linspace(lo - span, hi + span, 61)
    i = int(np.argmin([variance(g) for g in grid]))
    h = grid[1] - grid[0]
    res = optimize.minimize_scalar(
        variance, bracket=(grid[i] - h, grid[i], grid[i] + h), method="brent", tol=1e-12
    )
    return float(res.x)


# -- sampling-design grid search ---------------------------------------------------


def _design_grid_terms(p: np.ndarray, n: int, G: int) -> np.ndarray:
    levels = np.arange(G + 1) / G
    return (p[:, None] ** 2) * (1.0 - levels[None, :]) ** n


def simplex_grid_search(
    dist: DiscreteDistribution,
    event: Event,
    n: int,
    step: float,
    brute_force: bool = False,
    max_points: int = 5_000_000,
) -> tuple[dict[int, float], float]:
    """Minimize sum_A p**2 (1 - p')**n over p' on the grid {0, step, ..., 1}**|A|, sum 1.

    The objective is separable, so the default search is an exact dynamic
    programme over partial compositions; ``brute_force`` visits every grid
    point instead (small cases only).
    """
    G = round(1.0 / step)
    if not math.isclose(G * step, 1.0, rel_tol=1e-9):
        raise ValueError("step must divide 1")
    members = sorted(event.members)
    if not members:
        raise ValueError("empty event")
    p = np.array([dist.p(o) for o in members], dtype=float)
    f = _design_grid_terms(p, n, G)
    m = len(members)

    if brute_force:
        count = math.comb(G + m - 1, m - 1)
        if count > max_points:
            raise BudgetExceeded(f"{count} grid points exceed {max_points}")
        best, best_val = None, math.inf
        for cut in itertools.combinations(range(G + m - 1), m - 1):
            bounds = (-1,) + cut + (G + m - 1,)
            comp = [bounds[i + 1] - bounds[i] - 1 for i in range(m)]
            val = math.fsum(f[i, g] for i, g in enumerate(comp))
            if val < best_val:
                best, best_val = comp, val
        return {o: g / G for o, g in zip(members, best)}, best_val

    # cost[s]: best objective of the first i outcomes using s grid units
    cost = f[0].copy()
    choice = [np.arange(G + 1)]
    for i in range(1, m):
        new = np.full(G + 1, math.inf)
        pick = np.zeros(G + 1, dtype=int)
        for s in range(G + 1):
            cand = cost[s - np.arange(s + 1)] + f[i, : s + 1]
            g = int(np.argmin(cand))
            new[s], pick[s] = cand[g], g
        cost = new
        choice.append(pick)
    comp = [0] * m
    s = G
    for i in range(m - 1, 0, -1):
        comp[i] = int(choice[i][s])
        s -= comp[i]
    comp[0] = s
    weights = {o: g / G for o, g in zip(members, comp)}
    return weights, math.fsum(f[i, g] for i, g in enumerate(comp))
