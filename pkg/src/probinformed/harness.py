"""Experiment runner: variance comparisons, hypothesis tests, oracle suite.

All randomness flows from a master seed. Replication r at sample size n uses
the stream SeedSequence(seed, spawn_key=(n, r)), so results do not depend on
execution order.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import estimators as est
from . import importance as imp
from ._kernel import inclusion_bilinear
from .epidemic import (
    ChainParams,
    chain_event_groups,
    SentinelSchedule,
    SIModel,
    chain_model,
    chain_pi_analytic,
    chain_schedule,
    detect_many,
    model_from_edgelist,
    read_schedule,
    simulate_many,
)
from .oracle import EnumerationBudget, estimator_moments_many, exact_pi
from .sample_space import (
    DiscreteDistribution,
    EstimateReport,
    Event,
    NoInformationError,
    ProbabilitySample,
)

log = logging.getLogger(__name__)

ESTIMATORS: dict[str, Callable[[ProbabilitySample, Event], EstimateReport]] = {
    "pi0": est.pi0,
    "pi0_max": est.pi0_max,
    "pi1": est.pi1,
    "pi1_dual": est.pi1_dual,
    "pi1_combined": est.pi1_combined,
    "pi1_cv": est.pi1_cv,
    "pi2": est.pi2,
}

COMPARE_COLUMNS = (
    "estimator",
    "n",
    "rep_count",
    "pi_true",
    "est_mean",
    "est_var_empirical",
    "var_exact",
    "var_estimate_mean",
)


@dataclass
class ExperimentConfig:
    seed: int
    L: int = 10
    T: int = 20
    p1: float = 0.1
    p2: float = 0.5
    network: str | None = None
    schedule: str | None = None
    estimators: tuple[str, ...] = ("pi0", "pi1", "pi1_dual", "pi1_combined", "pi1_cv", "pi2")
    n_grid: tuple[int, ...] = (10,)
    reps: int = 1000
    out: str | None = None
    jackknife: str = "exact"

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ValueError("n grid must be nonempty and positive")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if self.jackknife not in ("exact", "approx"):
            raise ValueError("jackknife must be 'exact' or 'approx'")
        if (self.network is None) != (self.schedule is None):
            raise ValueError("network and schedule files go together")

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> ExperimentConfig:
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    @property
    def chain(self) -> ChainParams:
        return ChainParams(self.L, self.T, self.p1, self.p2)


def replication_rng(seed: int, n: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, r)))


@dataclass(frozen=True)
class SimulatedSample:
    sample: ProbabilitySample
    in_event: frozenset[int]


def simulated_sample(
    model: SIModel,
    schedule: SentinelSchedule,
    n: int,
    rng: np.random.Generator,
    event_is_detection: bool = True,
) -> SimulatedSample:
    """n trajectories as a probability-annotated sample plus their event membership."""
    batch = simulate_many(model, rng, n)
    ids = batch.outcome_ids()
    hits = detect_many(batch, schedule, model)
    flags = hits if event_is_detection else ~hits
    sample = ProbabilitySample.from_arrays(ids, batch.probs())
    return SimulatedSample(sample, frozenset(i for i, f in zip(ids, flags) if f))


# -- exact chain quantities ---------------------------------------------------------


def chain_groups(params: ChainParams, detected: bool) -> tuple[np.ndarray, np.ndarray]:
    """Distinct trajectory probabilities of the (un)detected event and multiplicities.

    Trajectories are observed over 0..T; undetected ones are the unseeded path
    and the truncated spreads where node L is still healthy at T.
    """
    if detected:
        return chain_event_groups(params)
    L, T, p1, p2, q2 = params.L, params.T, params.p1, params.p2, params.q2
    p = [1.0 - p1] + [p1 * p2**j * q2 ** (T - j) for j in range(min(L, T + 1))]
    c = [1] + [math.comb(T, j) for j in range(min(L, T + 1))]
    p = np.array(p, dtype=float)
    c = np.array(c, dtype=float)
    keep = p > 0
    return p[keep], c[keep]


def chain_v1(params: ChainParams, n: int, detected: bool = True) -> float:
    p, c = chain_groups(params, detected)
    ones = np.ones_like(p)
    return inclusion_bilinear(p, p, ones, ones, n, counts=c)


def chain_event_size(params: ChainParams, detected: bool = True) -> int:
    _, c = chain_groups(params, detected)
    return int(c.sum())


def chain_sweep(
    L: int, T: int, n: int, p1_grid: Sequence[float], p2_grid: Sequence[float]
) -> list[dict]:
    """v0 and v1 of the detection event over a (p1, p2) grid."""
    rows = []
    for p1, p2 in itertools.product(p1_grid, p2_grid):
        params = ChainParams(L, T, p1, p2)
        pi = chain_pi_analytic(params)
        v0 = est.v0_exact(pi, n)
        v1 = chain_v1(params, n)
        rows.append({"p1": p1, "p2": p2, "pi": pi, "v0": v0, "v1": v1, "v1_below_v0": v1 < v0})
    return rows


# -- compare ---------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _sample_variance_se(values: np.ndarray) -> tuple[float, float]:
    r = len(values)
    if r < 2:
        return math.nan, math.nan
    var = float(np.var(values, ddof=1))
    m4 = float(np.mean((values - values.mean()) ** 4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / r)


def run_compare(config: ExperimentConfig) -> list[dict]:
    """Empirical moments of each estimator over seeded replications, one row per (estimator, n)."""
    if config.network is not None:
        model = model_from_edgelist(config.network, config.T, config.p1, config.p2)
        schedule = read_schedule(config.schedule)
        params = None
        m = None
        pi_true = math.nan
    else:
        params = config.chain
        model = chain_model(params)
        schedule = chain_schedule(params)
        m = chain_event_size(params)
        pi_true = chain_pi_analytic(params)
    schedule.validate(model)

    rows = []
    for n in config.n_grid:
        estimates = {name: [] for name in config.estimators}
        var_estimates = {name: [] for name in config.estimators}
        for r in range(config.reps):
            sim = simulated_sample(model, schedule, n, replication_rng(config.seed, n, r))
            event = Event(sim.in_event, m if m is not None else len(sim.in_event))
            for name in config.estimators:
                if name == "pi2" and m is None:
                    continue
                try:
                    rep = ESTIMATORS[name](sim.sample, event)
                except NoInformationError:
                    continue
                estimates[name].append(rep.estimate)
                if name == "pi2" and config.jackknife == "approx" and rep.k >= 2:
                    var_estimates[name].append(est.v2_jackknife(sim.sample, event, approximate=True))
                elif rep.variance_estimate is not None:
                    var_estimates[name].append(rep.variance_estimate)

        exact = {"pi0": est.v0_exact(pi_true, n)} if params is not None else {}
        if params is not None:
            exact["pi1"] = chain_v1(params, n, detected=True)
            exact["pi1_dual"] = chain_v1(params, n, detected=False)

        for name in config.estimators:
            vals = np.asarray(estimates[name])
            emp_var, se = _sample_variance_se(vals)
            var_exact = exact.get(name)
            if var_exact is not None and len(vals) >= 2 and se > 0:
                if abs(emp_var - var_exact) > 5 * se:
                    log.warning(
                        "%s n=%d: empirical variance %.6g is %.1f SE from exact %.6g",
                        name, n, emp_var, abs(emp_var - var_exact) / se, var_exact,
                    )
            ve = var_estimates[name]
            rows.append(
                {
                    "estimator": name,
                    "n": n,
                    "rep_count": len(vals),
                    "pi_true": pi_true,
                    "est_mean": float(vals.mean()) if len(vals) else math.nan,
                    "est_var_empirical": emp_var,
                    "var_exact": var_exact,
                    "var_estimate_mean": float(np.mean(ve)) if ve else math.nan,
                }
            )
    return rows


def rows_to_csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


# -- hypothesis test --------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisTestResult:
    """Outcome of testing 'an outbreak occurred' given all tests came back negative.

    pi_hat estimates P(all tests negative | outbreak model). The point rule
    rejects when pi_hat < level; the conservative rule when
    pi_hat + 2 sqrt(variance_hat) < level.
    """

    pi_hat: float
    variance_hat: float
    level: float
    decision: str
    conservative_decision: str
    upper_confidence_bound: float
    estimator: str
    n: int
    k: int
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return asdict(self)


def run_hypothesis_test(
    model: SIModel,
    schedule: SentinelSchedule,
    level: float,
    n: int,
    estimator: str = "pi1",
    seed: int = 0,
    m: int | None = None,
) -> HypothesisTestResult:
    """Simulate n outbreaks and estimate the probability that every test is negative.

    ``m`` is the number of all-negative trajectories, needed only by pi2.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    schedule.validate(model)
    notes: list[str] = []
    if not schedule.tests:
        pi_hat, var_hat, k, used = 1.0, 0.0, n, estimator
        notes.append("empty schedule: all-negative event is certain")
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, 0)))
        sim = simulated_sample(model, schedule, n, rng, event_is_detection=False)
        event = Event(sim.in_event, m if m is not None else len(sim.in_event))
        used = estimator
        if estimator == "pi2" and m is None:
            notes.append("pi2 needs the event size m; fell back to pi1")
            used = "pi1"
        try:
            rep = ESTIMATORS[used](sim.sample, event)
        except NoInformationError as exc:
            notes.append(f"{used} undefined ({exc}); fell back to pi1")
            used = "pi1"
            rep = est.pi1(sim.sample, event)
        pi_hat, k = rep.estimate, rep.k
        var_hat = rep.variance_estimate
        if var_hat is None:
            notes.append("no variance estimate; used the relative-frequency plug-in")
            var_hat = est.pi0(sim.sample, event).variance_estimate
        notes.extend(rep.notes)
    if var_hat < 0:
        notes.append(f"negative variance estimate {var_hat!r} clamped to 0 for the bound")
    ucb = pi_hat + 2.0 * math.sqrt(max(var_hat, 0.0))
    return HypothesisTestResult(
        pi_hat=pi_hat,
        variance_hat=var_hat,
        level=level,
        decision="reject" if pi_hat < level else "retain",
        conservative_decision="reject" if ucb < level else "retain",
        upper_confidence_bound=ucb,
        estimator=used,
        n=n,
        k=k,
        notes=tuple(notes),
    )


# -- oracle suite ------------------------------------------------------------------

CATALOG: dict[int, tuple[tuple[float, ...], ...]] = {
    2: ((0.5, 0.5), (0.9, 0.1), (0.7, 0.3), (0.99, 0.01), (0.6, 0.4), (0.25, 0.75)),
    3: (
        (0.5, 0.3, 0.2),
        (1 / 3, 1 / 3, 1 / 3),
        (0.8, 0.15, 0.05),
        (0.6, 0.2, 0.2),
        (0.05, 0.05, 0.9),
        (0.45, 0.45, 0.1),
    ),
    4: (
        (0.25, 0.25, 0.25, 0.25),
        (0.4, 0.3, 0.2, 0.1),
        (0.7, 0.1, 0.1, 0.1),
        (0.01, 0.04, 0.15, 0.8),
        (0.5, 0.25, 0.125, 0.125),
        (0.3, 0.3, 0.2, 0.2),
    ),
}
N_GRID = (1, 2, 3, 4)
TOL = 1e-12


def proper_events(size: int) -> list[Event]:
    out = []
    for r in range(1, size):
        out.extend(Event.of(c) for c in itertools.combinations(range(size), r))
    return out


def observable(size: int) -> dict[int, float]:
    return {i: float((i + 1) ** 2) for i in range(size)}


def sampling_variants(dist: DiscreteDistribution) -> dict[str, DiscreteDistribution]:
    k = len(dist)
    return {
        "uniform": DiscreteDistribution.from_weights([1.0 / k] * k),
        "reversed": DiscreteDistribution.from_weights(list(reversed(dist.weights))),
    }


def equalized(dist: DiscreteDistribution, event: Event) -> DiscreteDistribution:
    """Same distribution with the event mass spread evenly over its members."""
    pi = dist.mass(event)
    w = [pi / event.m if o in event.members else dist.p(o) for o in dist.outcomes]
    return DiscreteDistribution(dist.outcomes, tuple(w))


def _entry(claim, size, weights, event, n, measured, expected, checked=True, extra=None, unattainable=False):
    disc = abs(measured - expected)
    if unattainable:
        status = "unattainable"
    elif not checked:
        status = "reported"
    else:
        status = "pass" if disc < TOL else "fail"
    out = {
        "claim": claim,
        "omega": size,
        "weights": list(weights),
        "event": sorted(event.members),
        "n": n,
        "measured": measured,
        "expected": expected,
        "discrepancy": disc,
        "checked": checked and not unattainable,
        "status": status,
    }
    if extra:
        out.update(extra)
    return out


def oracle_cell(dist: DiscreteDistribution, event: Event, n: int, budget: EnumerationBudget) -> list[dict]:
    """Every enumerated claim for one (distribution, event, n) cell."""
    size, w = len(dist), dist.weights
    pi = exact_pi(dist, event)
    X = observable(size)
    mu = math.fsum(dist.p(o) * X[o] for o in dist.outcomes)
    v1 = est.v1_exact(dist, event, n)
    sum_p2qn = math.fsum(dist.p(o) ** 2 * (1 - dist.p(o)) ** n for o in event.members)
    # One draw never observes two outcomes together, so cross terms p(a) p(b)
    # of the variance have no unbiased estimate.
    single_pairless = n == 1 and sum(dist.p(o) > 0 for o in event.members) >= 2

    estimators = {
        "pi0": est.pi0,
        "pi1": est.pi1,
        "pi1_dual": est.pi1_dual,
        "v1_hat": est.v1_hat,
        "sum_p2qn": est.est_sum_p2qn,
        "mu1_xi0": lambda s, e: est.mu1(s, est.MeanProblem(X, 0.0)),
        "mu1_xi1": lambda s, e: est.mu1(s, est.MeanProblem(X, 1.0)),
        "pi2": est.pi2,
        "pi1_combined": est.pi1_combined,
        "pi1_cv": est.pi1_cv,
    }
    truths = {"v1_hat": v1, "sum_p2qn": sum_p2qn, "mu1_xi0": mu, "mu1_xi1": mu}
    mom = estimator_moments_many(dist, event, n, estimators, truths=truths, budget=budget)

    out = [
        _entry("pi0 unbiased", size, w, event, n, mom["pi0"].mean, pi),
        _entry("pi0 variance = pi(1-pi)/n", size, w, event, n, mom["pi0"].variance, est.v0_exact(pi, n)),
        _entry("pi1 unbiased", size, w, event, n, mom["pi1"].mean, pi),
        _entry("v1_exact = Var(pi1)", size, w, event, n, mom["pi1"].variance, v1),
        _entry("pi1_dual unbiased", size, w, event, n, mom["pi1_dual"].mean, pi),
        _entry("v1_hat unbiased", size, w, event, n, mom["v1_hat"].mean, v1, unattainable=single_pairless),
        _entry("sum_p2qn estimate unbiased", size, w, event, n, mom["sum_p2qn"].mean, sum_p2qn),
        _entry("mu1 unbiased (xi=0)", size, w, event, n, mom["mu1_xi0"].mean, mu),
        _entry("mu1 unbiased (xi=1)", size, w, event, n, mom["mu1_xi1"].mean, mu),
    ]
    eq = equalized(dist, event)
    out.append(
        _entry(
            "v1_equal_mass = v1_exact",
            size, eq.weights, event, n,
            est.v1_equal_mass(est.EqualMassSpec(pi, event.m, n)),
            est.v1_exact(eq, event, n),
        )
    )
    for name in ("pi2", "pi1_combined", "pi1_cv"):
        mm = mom[name]
        out.append(
            _entry(
                f"{name} bias (reported)", size, w, event, n, mm.mean, pi, checked=False,
                extra={"variance": mm.variance, "defined_fraction": mm.defined_fraction},
            )
        )

    for label, sampling in sampling_variants(dist).items():
        is_est = {
            "pi1_is": imp.pi1_is,
            "v1_is_hat": imp.v1_is_hat,
            "pi0_is": imp.pi0_is,
        }
        v1_is = imp.v1_is_exact(dist, sampling, event, n)
        mm = estimator_moments_many(
            dist, event, n, is_est, sampling=sampling, truths={"v1_is_hat": v1_is}, budget=budget
        )
        tag = {"sampling": label}
        out.append(_entry("pi1_is unbiased", size, w, event, n, mm["pi1_is"].mean, pi, extra=tag))
        out.append(_entry("v1_is_exact = Var(pi1_is)", size, w, event, n, mm["pi1_is"].variance, v1_is, extra=tag))
        out.append(
            _entry(
                "v1_is_hat unbiased", size, w, event, n, mm["v1_is_hat"].mean, v1_is,
                extra=tag, unattainable=single_pairless,
            )
        )
        out.append(
            _entry("pi0_is bias (reported)", size, w, event, n, mm["pi0_is"].mean, pi, checked=False, extra=tag)
        )
    return out


def run_oracle_suite(budget: EnumerationBudget = EnumerationBudget()) -> dict:
    """Run the small-grid verification matrix; cells beyond the budget are skipped."""
    entries = []
    skipped = 0
    for size, vectors in CATALOG.items():
        for weights in vectors:
            dist = DiscreteDistribution.from_weights(weights)
            for event in proper_events(size):
                for n in N_GRID:
                    if size**n > budget.max_tuples:
                        skipped += 1
                        continue
                    entries.extend(oracle_cell(dist, event, n, budget))
    checked = [e for e in entries if e["checked"]]
    failed = [e for e in checked if e["status"] == "fail"]
    return {
        "tolerance": TOL,
        "cells_skipped": skipped,
        "checked": len(checked),
        "failed": len(failed),
        "unattainable": sum(e["status"] == "unattainable" for e in entries),
        "max_discrepancy": max((e["discrepancy"] for e in checked), default=0.0),
        "entries": entries,
    }
