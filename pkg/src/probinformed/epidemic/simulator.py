"""Discrete-time SI epidemics on networks with exact path-probability tracking.

Time runs over t = 0..T. At t = 0 every node is susceptible and can only be
infected from outside (probability p1(v, 0)). At t >= 1 a susceptible node
escapes infection with probability

    (1 - p1(v, t)) * prod over neighbours v' infected at t-1 of (1 - p2(v', v, t))

so updates are synchronous. Infection is absorbing. The log-probability of
every realized transition is accumulated, giving the exact probability of the
whole infection matrix.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Union

import numpy as np
from scipy import sparse

P1Spec = Union[float, Mapping[tuple[int, int], float], Callable[[int, int], float]]
P2Spec = Union[float, Mapping[tuple[int, int], float], Callable[[int, int, int], float]]


@dataclass(frozen=True)
class SIModel:
    """SI process on an undirected graph.

    p1 is the importation probability per (node, time): a scalar applies to
    every node and step, a mapping lists the nonzero entries, a callable is
    evaluated as p1(v, t). p2 is the per-edge transmission probability: a
    scalar, a mapping keyed by (source, target) or a callable p2(src, dst, t).
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    T: int
    p1: P1Spec
    p2: P2Spec
    _p1_table: np.ndarray = field(init=False, repr=False, compare=False)
    _p2_table: np.ndarray = field(init=False, repr=False, compare=False)
    _src: np.ndarray = field(init=False, repr=False, compare=False)
    _dst: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        index = {v: i for i, v in enumerate(nodes)}
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u not in index or v not in index:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

        p1 = np.zeros((len(nodes), self.T + 1))
        if callable(self.p1):
            for v, i in index.items():
                for t in range(self.T + 1):
                    p1[i, t] = self.p1(v, t)
        elif isinstance(self.p1, Mapping):
            for (v, t), val in self.p1.items():
                if 0 <= t <= self.T:
                    p1[index[v], t] = val
        else:
            p1[:] = float(self.p1)

        # both directions of every undirected edge
        src = [index[u] for u, v in edges] + [index[v] for u, v in edges]
        dst = [index[v] for u, v in edges] + [index[u] for u, v in edges]
        directed = [(u, v) for u, v in edges] + [(v, u) for u, v in edges]
        p2 = np.zeros((self.T + 1, len(directed)))
        if callable(self.p2):
            for e, (u, v) in enumerate(directed):
                for t in range(self.T + 1):
                    p2[t, e] = self.p2(u, v, t)
        elif isinstance(self.p2, Mapping):
            for e, (u, v) in enumerate(directed):
                p2[:, e] = self.p2.get((u, v), self.p2.get((v, u), 0.0))
        else:
            p2[:] = float(self.p2)

        for name, table in (("p1", p1), ("p2", p2)):
            if np.any(table < 0) or np.any(table > 1):
                raise ValueError(f"{name} values must lie in [0, 1]")
        object.__setattr__(self, "_p1_table", p1)
        object.__setattr__(self, "_p2_table", p2)
        object.__setattr__(self, "_src", np.array(src, dtype=np.intp))
        object.__setattr__(self, "_dst", np.array(dst, dtype=np.intp))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node_index(self, v: int) -> int:
        return self.nodes.index(v)


@dataclass(frozen=True)
class SentinelSchedule:
    """Scheduled infection tests as (node, time) pairs."""

    tests: tuple[tuple[int, int], ...] = ()

    def validate(self, model: SIModel) -> None:
        for v, t in self.tests:
            if v not in model.nodes:
                raise ValueError(f"sentinel node {v} not in model")
            if not 0 <= t <= model.T:
                raise ValueError(f"test time {t} outside 0..{model.T}")


def outcome_id(infected: np.ndarray) -> int:
    """Stable 63-bit handle of an infection matrix (row-major bit packing)."""
    infected = np.ascontiguousarray(infected, dtype=bool)
    h = hashlib.blake2b(digest_size=8)
    h.update(np.asarray(infected.shape, dtype="<i8").tobytes())
    h.update(np.packbits(infected, axis=None).tobytes())
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class Trajectory:
    """Infection matrix (nodes x times 0..T) and the log-probability of the path."""

    infected: np.ndarray
    logp: float

    @property
    def prob(self) -> float:
        return float(np.exp(self.logp))

    @property
    def outcome_id(self) -> int:
        return outcome_id(self.infected)


@dataclass(frozen=True)
class TrajectoryBatch:
    infected: np.ndarray  # (R, V, T+1)
    logp: np.ndarray  # (R,)

    def __len__(self) -> int:
        return len(self.logp)

    def __getitem__(self, r: int) -> Trajectory:
        return Trajectory(self.infected[r], float(self.logp[r]))

    def outcome_ids(self) -> list[int]:
        return [outcome_id(m) for m in self.infected]

    def probs(self) -> np.ndarray:
        return np.exp(self.logp)


def simulate_many(model: SIModel, rng: np.random.Generator, size: int) -> TrajectoryBatch:
    """Simulate ``size`` independent trajectories in one vectorized pass."""
    V, T = model.n_nodes, model.T
    n_dir = len(model._src)
    incidence = sparse.csr_array(
        (np.ones(n_dir), (np.arange(n_dir), model._dst)), shape=(n_dir, V)
    )
    state = np.zeros((size, V), dtype=bool)
    record = np.zeros((size, V, T + 1), dtype=bool)
    logp = np.zeros(size)

    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(T + 1):
            log_surv = np.broadcast_to(np.log1p(-model._p1_table[:, t]), (size, V)).copy()
            if t > 0 and n_dir:
                p2 = model._p2_table[t]
                certain = p2 >= 1.0
                src_inf = state[:, model._src]
                finite = np.where(certain, 0.0, np.log1p(-np.where(certain, 0.0, p2)))
                log_surv += np.asarray((src_inf * finite) @ incidence)
                if certain.any():
                    hit = np.asarray((src_inf & certain).astype(float) @ incidence) > 0
                    log_surv[hit] = -np.inf
            hazard = -np.expm1(log_surv)
            susceptible = ~state
            u = rng.random((size, V))
            newly = susceptible & (u < hazard)
            step_logp = np.where(newly, np.log(hazard), log_surv)
            logp += np.where(susceptible, step_logp, 0.0).sum(axis=1)
            state |= newly
            record[:, :, t] = state
    return TrajectoryBatch(record, logp)


def simulate(model: SIModel, rng: np.random.Generator) -> Trajectory:
    return simulate_many(model, rng, 1)[0]


def detect(trajectory: Trajectory | np.ndarray, schedule: SentinelSchedule, model: SIModel) -> bool:
    """True iff some scheduled test finds its node infected."""
    infected = trajectory.infected if isinstance(trajectory, Trajectory) else trajectory
    return any(infected[model.node_index(v), t] for v, t in schedule.tests)


def detect_many(batch: TrajectoryBatch, schedule: SentinelSchedule, model: SIModel) -> np.ndarray:
    hits = np.zeros(len(batch), dtype=bool)
    for v, t in schedule.tests:
        hits |= batch.infected[:, model.node_index(v), t]
    return hits


# -- file formats -----------------------------------------------------------------


def read_edgelist(path: str | Path) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...]]:
    nodes: dict[int, None] = {}
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            u, v = (int(tok) for tok in line.split()[:2])
            if u < 0 or v < 0:
                raise ValueError("node ids must be nonnegative")
            nodes.setdefault(u)
            nodes.setdefault(v)
            edges.append((u, v))
    return tuple(sorted(nodes)), tuple(edges)


def read_schedule(path: str | Path) -> SentinelSchedule:
    tests = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() in ("node", "") or row[0].startswith("#"):
                continue
            tests.append((int(row[0]), int(row[1])))
    return SentinelSchedule(tuple(tests))


def dump_trajectory(trajectory: Trajectory, path: str | Path) -> None:
    """One line per time step, one bit per node."""
    with open(path, "w") as fh:
        fh.write(f"# logp {trajectory.logp!r}\n")
        for column in trajectory.infected.T:
            fh.write("".join("1" if b else "0" for b in column) + "\n")


def model_from_edgelist(path: str | Path, T: int, p1: P1Spec, p2: P2Spec) -> SIModel:
    nodes, edges = read_edgelist(path)
    return SIModel(nodes, edges, T, p1, p2)

