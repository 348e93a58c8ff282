import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from probinformed.epidemic import (
    NO_SEED,
    TAIL,
    ChainParams,
    SentinelSchedule,
    SIModel,
    Trajectory,
    chain_complement_prob,
    chain_encode,
    chain_event_groups,
    chain_model,
    chain_outcome_prob,
    chain_pi_2f1,
    chain_pi_analytic,
    chain_schedule,
    chain_space,
    chain_truncated_prob,
    detect,
    detect_many,
    dump_trajectory,
    enumerate_chain_outcomes,
    hyp2f1_series,
    model_from_edgelist,
    outcome_id,
    read_edgelist,
    read_schedule,
    simulate,
    simulate_many,
)


def path_probability(nodes, edges, T, p1, p2, infected):
    """Independent evaluation of a trajectory's probability from the hazard formula."""
    nbrs = {v: [] for v in nodes}
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    idx = {v: i for i, v in enumerate(nodes)}
    prob = 1.0
    for t in range(T + 1):
        for v in nodes:
            was = t > 0 and infected[idx[v], t - 1]
            if was:
                continue
            escape = 1.0 - p1(v, t)
            if t > 0:
                for u in nbrs[v]:
                    if infected[idx[u], t - 1]:
                        escape *= 1.0 - p2(u, v, t)
            prob *= (1.0 - escape) if infected[idx[v], t] else escape
    return prob


def monotone_matrices(V, T):
    """All SI infection matrices: each node has an infection time in 0..T or never."""
    for times in itertools.product(range(T + 2), repeat=V):
        m = np.zeros((V, T + 1), dtype=bool)
        for i, t in enumerate(times):
            m[i, t:] = True
        yield m


class TestSimulator:
    def test_null_dynamics(self):
        model = SIModel((0, 1, 2), ((0, 1), (1, 2)), 5, 0.0, 0.7)
        traj = simulate(model, np.random.default_rng(0))
        assert not traj.infected.any()
        assert traj.logp == 0.0

    def test_deterministic_wave(self):
        params = ChainParams(4, 6, 1.0, 1.0)
        traj = simulate(chain_model(params), np.random.default_rng(0))
        assert chain_encode(traj.infected) == (1, 2, 3, 4)
        assert traj.prob == 1.0

    def test_general_network_exact(self):
        nodes, edges, T = (0, 1, 2), ((0, 1), (1, 2), (0, 2)), 2
        p1 = lambda v, t: 0.1 + 0.05 * v + 0.02 * t
        p2 = lambda u, v, t: 0.3 + 0.1 * ((u + v) % 2)
        model = SIModel(nodes, edges, T, p1, p2)
        total = math.fsum(
            path_probability(nodes, edges, T, p1, p2, m) for m in monotone_matrices(3, T)
        )
        assert total == pytest.approx(1.0, abs=1e-14)
        batch = simulate_many(model, np.random.default_rng(3), 2000)
        for r in range(len(batch)):
            expected = path_probability(nodes, edges, T, p1, p2, batch.infected[r])
            assert batch[r].prob == pytest.approx(expected, rel=1e-12)

    def test_p2_mapping_and_certain_edges(self):
        nodes, edges, T = (0, 1, 2), ((0, 1), (1, 2)), 3
        p2 = {(0, 1): 1.0, (1, 2): 0.25}
        model = SIModel(nodes, edges, T, {(0, 0): 1.0}, p2)
        batch = simulate_many(model, np.random.default_rng(1), 500)
        assert batch.infected[:, 1, 1].all()
        for r in range(len(batch)):
            ref = path_probability(
                nodes, edges, T,
                lambda v, t: 1.0 if (v, t) == (0, 0) else 0.0,
                lambda u, v, t: p2.get((u, v), p2.get((v, u))),
                batch.infected[r],
            )
            assert batch[r].prob == pytest.approx(ref, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(2, 6),
        st.integers(0, 6),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.integers(0, 2**32 - 1),
    )
    def test_monotone_and_logp(self, V, T, p1, p2, seed):
        rng = np.random.default_rng(seed)
        edges = tuple((u, v) for u in range(V) for v in range(u + 1, V) if rng.random() < 0.5)
        model = SIModel(tuple(range(V)), edges, T, p1, p2)
        batch = simulate_many(model, rng, 50)
        assert np.all(np.diff(batch.infected.astype(int), axis=2) >= 0)
        assert np.all(batch.logp <= 1e-15)

    def test_chain_logp_matches_analytic(self):
        params = ChainParams(3, 7, 0.6, 0.35)
        batch = simulate_many(chain_model(params), np.random.default_rng(11), 5000)
        for r in range(len(batch)):
            enc = chain_encode(batch.infected[r])
            if enc is NO_SEED:
                expected = 1 - params.p1
            else:
                expected = chain_truncated_prob(params, enc, params.T)
            assert batch[r].prob == pytest.approx(expected, abs=1e-12)

    def test_detection_frequency(self):
        params = ChainParams(3, 6, 0.5, 0.6)
        model = chain_model(params)
        hits = detect_many(simulate_many(model, np.random.default_rng(2), 100_000), chain_schedule(params), model)
        pi = chain_pi_analytic(params)
        se = math.sqrt(pi * (1 - pi) / len(hits))
        assert abs(hits.mean() - pi) < 4 * se

    def test_seed_reproducible(self):
        model = chain_model(ChainParams(5, 9, 0.4, 0.5))
        a = simulate_many(model, np.random.default_rng(9), 100)
        b = simulate_many(model, np.random.default_rng(9), 100)
        assert np.array_equal(a.infected, b.infected) and np.array_equal(a.logp, b.logp)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(nodes=(0, 0), edges=(), T=1, p1=0.1, p2=0.1),
            dict(nodes=(0, 1), edges=((0, 2),), T=1, p1=0.1, p2=0.1),
            dict(nodes=(0,), edges=(), T=-1, p1=0.1, p2=0.1),
            dict(nodes=(0,), edges=(), T=1, p1=1.5, p2=0.1),
        ],
    )
    def test_invalid_models(self, kwargs):
        with pytest.raises(ValueError):
            SIModel(**kwargs)


class TestDetect:
    def test_empty_schedule(self):
        m = np.ones((3, 4), dtype=bool)
        model = SIModel((0, 1, 2), (), 3, 0.0, 0.0)
        assert not detect(m, SentinelSchedule(()), model)

    def test_all_infected(self):
        model = SIModel((0, 1, 2), (), 3, 0.0, 0.0)
        m = np.ones((3, 4), dtype=bool)
        assert detect(Trajectory(m, 0.0), SentinelSchedule(((2, 1), (0, 3))), model)

    def test_chain_definition(self):
        params = ChainParams(2, 4, 1.0, 0.5)
        model = chain_model(params)
        sched = chain_schedule(params)
        on_time = np.zeros((3, 5), dtype=bool)
        on_time[0, 0:] = on_time[1, 2:] = on_time[2, 4:] = True
        late = on_time.copy()
        late[2, 4] = False
        assert detect(on_time, sched, model)
        assert not detect(late, sched, model)

    def test_schedule_validation(self):
        model = SIModel((0, 1), (), 3, 0.0, 0.0)
        with pytest.raises(ValueError):
            SentinelSchedule(((5, 1),)).validate(model)
        with pytest.raises(ValueError):
            SentinelSchedule(((0, 4),)).validate(model)


class TestOutcomeId:
    def test_stable_and_distinct(self):
        a = np.zeros((3, 4), dtype=bool)
        b = a.copy()
        b[1, 2:] = True
        assert outcome_id(a) == outcome_id(a.copy())
        assert outcome_id(a) != outcome_id(b)
        assert outcome_id(np.zeros((4, 3), dtype=bool)) != outcome_id(a)
        assert 0 <= outcome_id(b) < 2**63


# -- chain toy model ---------------------------------------------------------------


class TestChainProbabilities:
    p1, p2 = 0.3, 0.4

    def params(self, L=1, T=3):
        return ChainParams(L, T, self.p1, self.p2)

    def test_outcome_prob(self):
        q2 = 1 - self.p2
        assert chain_outcome_prob(self.params(), (1,)) == pytest.approx(self.p1 * self.p2)
        assert chain_outcome_prob(self.params(), (3,)) == pytest.approx(self.p1 * q2**2 * self.p2)
        assert chain_outcome_prob(self.params(), NO_SEED) == pytest.approx(1 - self.p1)
        assert chain_outcome_prob(ChainParams(3, 3, 0.3, 1.0), (1, 2, 3)) == 0.3

    @pytest.mark.parametrize("times", [(2, 1), (0, 2), (1, 1), (1,)])
    def test_invalid_encoding(self, times):
        with pytest.raises(ValueError):
            chain_outcome_prob(ChainParams(2, 5, 0.3, 0.4), times)

    def test_pi_hand_values(self):
        assert chain_pi_analytic(self.params(1, 1)) == pytest.approx(self.p1 * self.p2, rel=1e-15)
        assert chain_pi_analytic(self.params(1, 2)) == pytest.approx(
            self.p1 * (1 - (1 - self.p2) ** 2), rel=1e-15
        )
        assert chain_pi_analytic(ChainParams(5, 9, 0.3, 1.0)) == 0.3
        assert chain_pi_analytic(ChainParams(5, 4, 0.3, 0.5)) == 0.0

    def test_2f1_agreement(self):
        params = ChainParams(10, 20, 0.1, 0.5)
        assert abs(chain_pi_2f1(params) - chain_pi_analytic(params)) <= 1e-10
        # the series stops at relative tolerance 1e-12
        assert chain_pi_2f1(self.params(1, 1)) == pytest.approx(self.p1 * self.p2, abs=1e-12)

    def test_2f1_near_certain_transmission(self):
        params = ChainParams(4, 9, 0.3, 1 - 1e-12)
        assert chain_pi_2f1(params) == pytest.approx(chain_pi_analytic(ChainParams(4, 9, 0.3, 1.0)), abs=1e-10)

    @pytest.mark.parametrize(
        "a, b, c, z", [(1, 21, 12, 0.5), (1, 31, 20, 0.95), (0.5, 1.5, 2.5, -0.7), (2, 3, 4, 0.0)]
    )
    def test_hyp2f1_series(self, a, b, c, z):
        assert hyp2f1_series(a, b, c, z) == pytest.approx(special.hyp2f1(a, b, c, z), rel=1e-11)

    def test_hyp2f1_domain(self):
        with pytest.raises(ValueError):
            hyp2f1_series(1, 1, 1, 1.0)
        with pytest.raises(ValueError):
            hyp2f1_series(1, 1, -2, 0.5)

    def test_complement(self):
        params = ChainParams(10, 20, 0.1, 0.5)
        assert chain_complement_prob(params) + chain_pi_analytic(params) == pytest.approx(1.0, abs=1e-12)
        assert chain_complement_prob(ChainParams(3, 5, 0.0, 0.5)) == 1.0
        L1 = self.params(1, 7)
        expected = (1 - self.p1) + self.p1 * (1 - self.p2) ** 7
        assert chain_complement_prob(L1) == pytest.approx(expected, abs=1e-14)


class TestChainEnumeration:
    def test_lumped_hand_enumeration(self):
        p1, p2 = 0.3, 0.4
        q2 = 1 - p2
        out = dict(enumerate_chain_outcomes(ChainParams(1, 2, p1, p2), 2, expand_residual=False))
        assert out.keys() == {(1,), (2,), NO_SEED, TAIL}
        assert out[(1,)] == pytest.approx(p1 * p2)
        assert out[(2,)] == pytest.approx(p1 * q2 * p2)
        assert out[NO_SEED] == pytest.approx(1 - p1)
        assert out[TAIL] == pytest.approx(p1 * q2**2, abs=1e-14)
        assert math.fsum(out.values()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("expand", [True, False])
    def test_certain_transmission(self, expand):
        out = enumerate_chain_outcomes(ChainParams(3, 6, 0.3, 1.0), 6, expand_residual=expand)
        assert dict(out) == {NO_SEED: pytest.approx(0.7), (1, 2, 3): pytest.approx(0.3)}

    @pytest.mark.parametrize("expand", [True, False])
    def test_normalized(self, expand):
        out = enumerate_chain_outcomes(ChainParams(3, 8, 0.3, 0.4), 8, expand_residual=expand)
        assert math.fsum(p for _, p in out) == pytest.approx(1.0, abs=1e-12)

    def test_analytic_consistency(self):
        params = ChainParams(4, 9, 0.45, 0.35)
        out = enumerate_chain_outcomes(params, params.T)
        detected = math.fsum(p for e, p in out if e is not NO_SEED and len(e) == params.L)
        assert detected == pytest.approx(chain_pi_analytic(params), abs=1e-12)

    def test_budget_and_domain(self):
        with pytest.raises(ValueError):
            enumerate_chain_outcomes(ChainParams(10, 30, 0.1, 0.5), 30, budget=1000)
        with pytest.raises(ValueError):
            enumerate_chain_outcomes(ChainParams(4, 3, 0.1, 0.5), 3)

    def test_space(self):
        params = ChainParams(3, 6, 0.4, 0.5)
        space = chain_space(params)
        assert space.dist.mass(space.detected) == pytest.approx(chain_pi_analytic(params), abs=1e-14)
        assert space.dist.mass(space.undetected) == pytest.approx(chain_complement_prob(params), abs=1e-12)
        assert space.outcome_of((1, 2, 3)) in space.detected.members
        p, c = chain_event_groups(params)
        assert c.sum() == len(space.detected.members)
        assert math.fsum(p * c) == pytest.approx(chain_pi_analytic(params), abs=1e-15)

    def test_params_validation(self):
        for bad in [(0, 3, 0.1, 0.5), (2, -1, 0.1, 0.5), (2, 3, 1.1, 0.5), (2, 3, 0.1, 0.0)]:
            with pytest.raises(ValueError):
                ChainParams(*bad)


class TestFiles:
    def test_edgelist_and_schedule(self, tmp_path):
        (tmp_path / "g.txt").write_text("# ring\n0 1\n1 2\n2 0  # closes\n\n")
        (tmp_path / "s.csv").write_text("node,time\n2,3\n0,1\n")
        nodes, edges = read_edgelist(tmp_path / "g.txt")
        assert nodes == (0, 1, 2) and edges == ((0, 1), (1, 2), (2, 0))
        sched = read_schedule(tmp_path / "s.csv")
        assert sched.tests == ((2, 3), (0, 1))
        model = model_from_edgelist(tmp_path / "g.txt", 3, 0.1, 0.2)
        sched.validate(model)

    def test_negative_node(self, tmp_path):
        (tmp_path / "g.txt").write_text("0 -1\n")
        with pytest.raises(ValueError):
            read_edgelist(tmp_path / "g.txt")

    def test_dump(self, tmp_path):
        m = np.array([[True, True, True], [False, False, True]])
        dump_trajectory(Trajectory(m, -0.5), tmp_path / "t.txt")
        assert (tmp_path / "t.txt").read_text() == "# logp -0.5\n10\n10\n11\n"
