"""Chain toy model: SI spread along nodes 0..L, seeded only at node 0, t = 0.

A seeded trajectory is encoded by the first-infection times t_1 < ... < t_L
of nodes 1..L. Its probability is p1 * p2**L * q2**(t_L - L). The event of
interest is that node L is infected by time T.

Formulas are written as p2**L * q2**(...) throughout rather than through the
ratio p2/q2, so p2 = 1 needs no special casing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..sample_space import DiscreteDistribution, Event
from .simulator import SentinelSchedule, SIModel

NO_SEED = None
TAIL = "t_L>t_max"

Encoding = Union[None, tuple[int, ...], str]


@dataclass(frozen=True)
class ChainParams:
    L: int
    T: int
    p1: float
    p2: float

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not 0 <= self.p1 <= 1:
            raise ValueError("p1 must lie in [0, 1]")
        if not 0 < self.p2 <= 1:
            raise ValueError("p2 must lie in (0, 1]")

    @property
    def q2(self) -> float:
        return 1.0 - self.p2


def chain_model(params: ChainParams) -> SIModel:
    nodes = tuple(range(params.L + 1))
    edges = tuple((v, v + 1) for v in range(params.L))
    return SIModel(nodes, edges, params.T, {(0, 0): params.p1}, params.p2)


def chain_schedule(params: ChainParams) -> SentinelSchedule:
    return SentinelSchedule(((params.L, params.T),))


def chain_encode(infected: np.ndarray) -> Encoding:
    """Encode an infection matrix (nodes x times 0..T) of the chain model.

    Returns NO_SEED if node 0 is healthy, else the tuple of first-infection
    times of nodes 1, 2, ... that got infected within the horizon.
    """
    if not infected[0, 0]:
        return NO_SEED
    times = []
    for row in infected[1:]:
        hit = np.flatnonzero(row)
        if len(hit) == 0:
            break
        times.append(int(hit[0]))
    return tuple(times)


def _check_times(times: tuple[int, ...]) -> None:
    prev = 0
    for v, t in enumerate(times, start=1):
        if t < v or t <= prev:
            raise ValueError(f"invalid encoding {times}: need t_v >= v and strictly increasing")
        prev = t


def chain_outcome_prob(params: ChainParams, times: Optional[tuple[int, ...]]) -> float:
    """Probability of a fully spread chain trajectory with first-infection times ``times``."""
    if times is NO_SEED:
        return 1.0 - params.p1
    times = tuple(times)
    if len(times) != params.L:
        raise ValueError(f"expected {params.L} times, got {len(times)}")
    _check_times(times)
    return params.p1 * params.p2**params.L * params.q2 ** (times[-1] - params.L)


def chain_truncated_prob(params: ChainParams, times: tuple[int, ...], horizon: int) -> float:
    """Probability that exactly nodes 1..len(times) are infected by ``horizon``, at ``times``."""
    j = len(times)
    _check_times(times)
    if j == params.L:
        if times and times[-1] > horizon:
            raise ValueError("times beyond the horizon")
        return chain_outcome_prob(params, times)
    if times and times[-1] > horizon:
        raise ValueError("times beyond the horizon")
    # node j+1 then fails on every step from t_j + 1 to the horizon
    return params.p1 * params.p2**j * params.q2 ** (horizon - j)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def chain_pi_analytic(params: ChainParams) -> float:
    """P(node L infected by T) = p1 p2**L sum_{t=L}^{T} C(t-1, L-1) q2**(t-L)."""
    L, T = params.L, params.T
    if T < L:
        return 0.0
    terms = [math.comb(t - 1, L - 1) * params.q2 ** (t - L) for t in range(L, T + 1)]
    return params.p1 * params.p2**L * math.fsum(terms)


def hyp2f1_series(a: float, b: float, c: float, z: float, rtol: float = 1e-12, max_terms: int = 100_000) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) by direct power-series summation, |z| < 1."""
    if abs(z) >= 1:
        raise ValueError("series requires |z| < 1")
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a nonpositive integer")
    term, total = 1.0, 1.0
    parts = [1.0]
    for j in range(max_terms):
        term *= (a + j) * (b + j) / ((c + j) * (j + 1)) * z
        parts.append(term)
        total += term
        if term == 0.0:
            break
        ratio = abs((a + j + 1) * (b + j + 1) / ((c + j + 1) * (j + 2)) * z)
        # geometric bound on the remainder once the term ratio is below one
        if ratio < 1 and abs(term) * ratio / (1 - ratio) <= rtol * abs(total):
            break
    else:
        raise ArithmeticError("2F1 series did not converge")
    return math.fsum(parts)


def chain_pi_2f1(params: ChainParams) -> float:
    """Closed form p1 (1 - p2**L q2**(T+1-L) C(T, L-1) 2F1(1, T+1; T+2-L; q2))."""
    L, T = params.L, params.T
    if T < L:
        return 0.0
    head = params.p2**L * params.q2 ** (T + 1 - L) * math.comb(T, L - 1)
    if head == 0.0:
        return params.p1
    return params.p1 * (1.0 - head * hyp2f1_series(1.0, T + 1.0, T + 2.0 - L, params.q2))


def _tail_sum(params: ChainParams, start: int, tol: float = 1e-14) -> float:
    """p2**L sum_{t >= start} C(t-1, L-1) q2**(t-L): P(t_L >= start | seeded)."""
    L, q2 = params.L, params.q2
    t = max(start, L)
    if q2 == 0.0:
        return 1.0 if t == L else 0.0
    log_q2 = math.log(q2)
    term = math.exp(_log_comb(t - 1, L - 1) + L * math.log(params.p2) + (t - L) * log_q2)
    parts = [term]
    while True:
        ratio = t / (t - L + 1) * q2
        term *= ratio
        t += 1
        parts.append(term)
        nxt = t / (t - L + 1) * q2
        if nxt < 1 and term * nxt / (1 - nxt) < tol:
            break
    return math.fsum(parts)


def chain_complement_prob(params: ChainParams) -> float:
    """P(node L not infected by T) = 1 - p1 + p1 P(t_L > T | seeded)."""
    if params.p1 == 0:
        return 1.0
    return 1.0 - params.p1 + params.p1 * _tail_sum(params, params.T + 1)


def enumerate_chain_outcomes(
    params: ChainParams,
    t_max: int,
    expand_residual: bool = True,
    budget: int = 10_000_000,
) -> list[tuple[Encoding, float]]:
    """All chain outcomes observable up to ``t_max`` with their probabilities.

    Full spreads with t_L <= t_max are listed individually. Trajectories where
    node L is still healthy at t_max are either expanded into truncated tuples
    (t_1..t_j, j < L) or lumped into a single TAIL entry. The unseeded outcome
    is NO_SEED. Zero-probability outcomes are dropped; the probabilities sum
    to one.
    """
    if t_max < params.L:
        raise ValueError("t_max must be at least L")
    L = params.L
    size = math.comb(t_max, L) + 1
    if expand_residual:
        size += sum(math.comb(t_max, j) for j in range(L))
    if size > budget:
        raise ValueError(f"enumeration of {size} outcomes exceeds budget {budget}")

    out: list[tuple[Encoding, float]] = []
    if params.p1 < 1:
        out.append((NO_SEED, 1.0 - params.p1))
    if params.p1 == 0:
        return out
    base = params.p1 * params.p2**L
    for times in itertools.combinations(range(1, t_max + 1), L):
        p = base * params.q2 ** (times[-1] - L)
        if p > 0:
            out.append((times, p))
    if expand_residual:
        for j in range(L):
            p = params.p1 * params.p2**j * params.q2 ** (t_max - j)
            if p == 0:
                continue
            for times in itertools.combinations(range(1, t_max + 1), j):
                out.append((times, p))
    else:
        tail = params.p1 * _tail_sum(params, t_max + 1)
        if tail > 0:
            out.append((TAIL, tail))
    return out


@dataclass(frozen=True)
class ChainSpace:
    """Enumerated outcome space of a chain model over the horizon 0..T."""

    params: ChainParams
    encodings: tuple[Encoding, ...]
    dist: DiscreteDistribution
    detected: Event

    def outcome_of(self, encoding: Encoding) -> int:
        return self._ids[encoding]

    @property
    def _ids(self) -> dict:
        ids = self.__dict__.get("_id_cache")
        if ids is None:
            ids = {e: i for i, e in enumerate(self.encodings)}
            object.__setattr__(self, "_id_cache", ids)
        return ids

    @property
    def undetected(self) -> Event:
        return self.dist.complement(self.detected)


def chain_space(params: ChainParams, budget: int = 10_000_000) -> ChainSpace:
    """Finite outcome space of trajectories observed up to T; outcome ids are list indices."""
    if params.T < params.L:
        raise ValueError("horizon T must be at least L")
    outcomes = enumerate_chain_outcomes(params, params.T, True, budget)
    encodings = tuple(e for e, _ in outcomes)
    dist = DiscreteDistribution(tuple(range(len(encodings))), tuple(p for _, p in outcomes))
    detected = Event.of(
        i for i, e in enumerate(encodings) if e is not NO_SEED and len(e) == params.L
    )
    return ChainSpace(params, encodings, dist, detected)


def chain_event_groups(params: ChainParams) -> tuple[np.ndarray, np.ndarray]:
    """Distinct outcome probabilities in the detection event and their multiplicities."""
    L, T = params.L, params.T
    ts = range(L, T + 1)
    p = np.array([params.p1 * params.p2**L * params.q2 ** (t - L) for t in ts])
    counts = np.array([math.comb(t - 1, L - 1) for t in ts], dtype=float)
    keep = p > 0
    return p[keep], counts[keep]
