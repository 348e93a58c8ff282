"""Finite probability spaces, events and probability-annotated samples.

Every draw in a :class:`ProbabilitySample` carries the probability ``x`` of the
drawn outcome under the target distribution, and optionally the probability
``y`` under the distribution it was actually sampled from.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

_SUM_TOL = 1e-12


class SampleError(ValueError):
    """Malformed sample or distribution input."""


class NoInformationError(ValueError):
    """The estimator is undefined on this sample (e.g. no draw fell in the event)."""


class InsufficientDataError(ValueError):
    """Too few draws for the requested variance estimate."""


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite outcome set with probability weights."""

    outcomes: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        outcomes = tuple(int(o) for o in self.outcomes)
        weights = tuple(float(w) for w in self.weights)
        if len(outcomes) != len(weights):
            raise SampleError("outcomes and weights differ in length")
        if len(set(outcomes)) != len(outcomes):
            raise SampleError("outcome identifiers must be unique")
        if any(w < 0 or w > 1 for w in weights):
            raise SampleError("weights must lie in [0, 1]")
        total = float(np.sum(weights)) if weights else 0.0
        if abs(total - 1.0) > _SUM_TOL:
            raise SampleError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_index", {o: i for i, o in enumerate(outcomes)})

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> DiscreteDistribution:
        """Label outcomes 0..len(weights)-1."""
        return cls(tuple(range(len(weights))), tuple(weights))

    def __len__(self) -> int:
        return len(self.outcomes)

    def p(self, outcome: int) -> float:
        return self.weights[self._index[outcome]]

    def q(self, outcome: int) -> float:
        return 1.0 - self.p(outcome)

    def __contains__(self, outcome: int) -> bool:
        return outcome in self._index

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def mass(self, event: Event) -> float:
        return float(np.sum([self.p(o) for o in self.outcomes if o in event.members]))

    def complement(self, event: Event) -> Event:
        return Event.of(o for o in self.outcomes if o not in event.members)

    def check_event(self, event: Event) -> None:
        stray = [o for o in event.members if o not in self._index]
        if stray:
            raise SampleError(f"event members not in distribution: {stray[:5]}")

    def draw(
        self,
        n: int,
        rng: np.random.Generator,
        sampling: DiscreteDistribution | None = None,
    ) -> ProbabilitySample:
        """Draw ``n`` iid outcomes, annotated with their probabilities.

        With ``sampling`` given, draws come from that distribution and each
        draw also carries ``y``, its sampling probability.
        """
        source = self if sampling is None else sampling
        idx = rng.choice(len(source), size=n, p=source.as_array())
        ids = [source.outcomes[i] for i in idx]
        if sampling is None:
            return ProbabilitySample.from_arrays(ids, [self.p(o) for o in ids])
        return ProbabilitySample.from_arrays(
            ids, [self.p(o) for o in ids], [sampling.p(o) for o in ids]
        )


@dataclass(frozen=True)
class Event:
    """Subset of outcomes with known cardinality ``m``.

    ``members`` may list only part of the event when the outcome space is too
    large to enumerate (e.g. simulated trajectories); estimators only query
    membership of observed outcomes. In that case ``m`` is the declared full
    cardinality and ``complete`` is False.
    """

    members: frozenset[int]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(o) for o in self.members))
        if self.m < len(self.members):
            raise SampleError(f"m={self.m} below member count {len(self.members)}")

    @classmethod
    def of(cls, members: Iterable[int]) -> Event:
        members = frozenset(members)
        return cls(members, len(members))

    @property
    def complete(self) -> bool:
        return self.m == len(self.members)

    def __contains__(self, outcome: int) -> bool:
        return outcome in self.members

    def __len__(self) -> int:
        return self.m


@dataclass(frozen=True)
class Draw:
    outcome: int
    x: float
    y: float | None = None


@dataclass(frozen=True)
class ProbabilitySample:
    """Ordered iid draws with attached outcome probabilities."""

    draws: tuple[Draw, ...]

    def __post_init__(self):
        draws = tuple(d if isinstance(d, Draw) else Draw(*d) for d in self.draws)
        has_y = {d.y is not None for d in draws}
        if len(has_y) > 1:
            raise SampleError("either every draw carries y or none does")
        for d in draws:
            if not 0.0 < d.x <= 1.0:
                raise SampleError(f"x={d.x!r} for outcome {d.outcome} outside (0, 1]")
            if d.y is not None and not 0.0 < d.y <= 1.0:
                raise SampleError(f"y={d.y!r} for outcome {d.outcome} outside (0, 1]")
        object.__setattr__(self, "draws", draws)

    @classmethod
    def from_arrays(
        cls,
        outcomes: Sequence[int],
        x: Sequence[float],
        y: Sequence[float] | None = None,
    ) -> ProbabilitySample:
        if y is None:
            return cls(tuple(Draw(int(o), float(xi)) for o, xi in zip(outcomes, x, strict=True)))
        return cls(
            tuple(
                Draw(int(o), float(xi), float(yi))
                for o, xi, yi in zip(outcomes, x, y, strict=True)
            )
        )

    @property
    def n(self) -> int:
        return len(self.draws)

    @property
    def has_sampling_probs(self) -> bool:
        return bool(self.draws) and self.draws[0].y is not None

    def __iter__(self) -> Iterator[Draw]:
        return iter(self.draws)

    def __len__(self) -> int:
        return len(self.draws)

    def k(self, event: Event) -> int:
        return sum(1 for d in self.draws if d.outcome in event.members)


def observed_set(sample: ProbabilitySample) -> tuple[Draw, ...]:
    """Distinct observed outcomes in order of first occurrence.

    Raises SampleError if one outcome appears with conflicting annotations.
    """
    seen: dict[int, Draw] = {}
    for d in sample.draws:
        prev = seen.get(d.outcome)
        if prev is None:
            seen[d.outcome] = d
        elif prev.x != d.x or prev.y != d.y:
            raise SampleError(f"outcome {d.outcome} drawn with inconsistent probabilities")
    return tuple(seen.values())


def event_split(
    sample: ProbabilitySample, event: Event
) -> tuple[ProbabilitySample, ProbabilitySample]:
    """Split draws into those inside and outside ``event``, keeping order."""
    inside = tuple(d for d in sample.draws if d.outcome in event.members)
    outside = tuple(d for d in sample.draws if d.outcome not in event.members)
    return ProbabilitySample(inside), ProbabilitySample(outside)


@dataclass(frozen=True)
class EstimateReport:
    estimator_id: str
    estimate: float
    variance_estimate: float | None
    n: int
    k: int
    notes: tuple[str, ...] = field(default=())


# -- CSV serialization ---------------------------------------------------------


def write_sample(sample: ProbabilitySample, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for d in sample.draws:
            row = [d.outcome, repr(d.x)]
            if d.y is not None:
                row.append(repr(d.y))
            writer.writerow(row)


def read_sample(path: str | Path) -> ProbabilitySample:
    draws = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip() == "outcome_id":
                continue
            if len(row) not in (2, 3):
                raise SampleError(f"{path}:{lineno}: expected outcome_id,x[,y]")
            y = float(row[2]) if len(row) == 3 else None
            draws.append(Draw(int(row[0]), float(row[1]), y))
    return ProbabilitySample(tuple(draws))


def write_distribution(dist: DiscreteDistribution, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["outcome_id", "p"])
        for o, w in zip(dist.outcomes, dist.weights):
            writer.writerow([o, repr(w)])


def read_distribution(path: str | Path) -> DiscreteDistribution:
    outcomes, weights = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0].strip() == "outcome_id":
                continue
            outcomes.append(int(row[0]))
            weights.append(float(row[1]))
    return DiscreteDistribution(tuple(outcomes), tuple(weights))
