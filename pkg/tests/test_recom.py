import random

import numpy as np
import pytest

from oracles import enumerate_balanced_two_partitions

from districtlab.citygraph import build_grid
from districtlab.partition import DistrictPlan, is_valid, seed_from_scratch
from districtlab.recom import ChainConfig, build_ensemble, recom_step, run_chain


@pytest.fixture(scope="module")
def toy_states():
    graph = build_grid(4, 4, 1)
    return graph, enumerate_balanced_two_partitions(graph, 0.2)


class TestRecomStep:
    def test_single_district_rejected(self):
        g = build_grid(3, 3, 1)
        plan = DistrictPlan(assignment=np.zeros(9, dtype=np.int32), n_districts=1)
        with pytest.raises(ValueError):
            recom_step(g, plan, ChainConfig(steps=1), random.Random(0))

    def test_touches_at_most_two_districts(self):
        g = build_grid(12, 12, 10)
        plan = seed_from_scratch(g, 6, rng_seed=2)
        rng = random.Random(5)
        cfg = ChainConfig(steps=1)
        for _ in range(30):
            nxt = recom_step(g, plan, cfg, rng)
            changed = {
                (int(a), int(b))
                for a, b in zip(plan.assignment, nxt.assignment)
                if a != b
            }
            touched = {a for a, _ in changed} | {b for _, b in changed}
            assert len(touched) <= 2
            assert nxt.n_districts == plan.n_districts
            assert len(nxt.assignment) == len(plan.assignment)
            plan = nxt

    def test_output_always_valid(self):
        g = build_grid(10, 10, 7)
        plan = seed_from_scratch(g, 4, rng_seed=3)
        rng = random.Random(1)
        cfg = ChainConfig(steps=1, epsilon=0.2)
        for _ in range(40):
            plan = recom_step(g, plan, cfg, rng)
            assert is_valid(g, plan, 0.2).ok

    def test_toy_states_stay_in_enumerated_set(self, toy_states):
        graph, oracle = toy_states
        assign = np.asarray([0] * 8 + [1] * 8, dtype=np.int32)
        plan = DistrictPlan(assignment=assign, n_districts=2)
        assert plan.canonical_bytes() in oracle
        rng = random.Random(17)
        cfg = ChainConfig(steps=1, epsilon=0.2)
        for _ in range(300):
            plan = recom_step(graph, plan, cfg, rng)
            assert plan.canonical_bytes() in oracle


class TestRunChain:
    def test_single_step(self):
        g = build_grid(6, 6, 5)
        seed = seed_from_scratch(g, 4, rng_seed=0)
        states = run_chain(g, seed, ChainConfig(steps=1, rng_seed=9))
        assert len(states) == 1
        assert is_valid(g, states[0], 0.2).ok

    def test_deterministic(self):
        g = build_grid(8, 8, 3)
        seed = seed_from_scratch(g, 4, rng_seed=1)
        a = run_chain(g, seed, ChainConfig(steps=25, rng_seed=123))
        b = run_chain(g, seed, ChainConfig(steps=25, rng_seed=123))
        assert a == b
        c = run_chain(g, seed, ChainConfig(steps=25, rng_seed=124))
        assert a != c

    def test_invalid_seed_rejected(self):
        g = build_grid(4, 4, 1)
        lopsided = DistrictPlan(
            assignment=np.asarray([0] * 15 + [1], dtype=np.int32), n_districts=2
        )
        with pytest.raises(ValueError, match="seed plan"):
            run_chain(g, lopsided, ChainConfig(steps=1))


class TestBuildEnsemble:
    def test_size_formula(self):
        g = build_grid(8, 8, 3)
        seeds = [seed_from_scratch(g, 4, rng_seed=s) for s in range(2)]
        ensemble = build_ensemble(g, seeds, 10, ChainConfig(steps=10, rng_seed=0))
        assert len(ensemble) == 2 * (10 + 1)
        assert all(is_valid(g, p, 0.2).ok for p in ensemble)

    def test_zero_steps_returns_seeds(self):
        g = build_grid(5, 5, 2)
        seeds = [seed_from_scratch(g, 3, rng_seed=7)]
        ensemble = build_ensemble(g, seeds, 0, ChainConfig(steps=1))
        assert ensemble == seeds

    def test_mismatched_district_counts_rejected(self):
        g = build_grid(6, 6, 2)
        seeds = [seed_from_scratch(g, 3, rng_seed=0), seed_from_scratch(g, 4, rng_seed=0)]
        with pytest.raises(ValueError):
            build_ensemble(g, seeds, 5, ChainConfig(steps=5))

    def test_seeds_included_and_deterministic(self):
        g = build_grid(8, 8, 3)
        seeds = [seed_from_scratch(g, 4, rng_seed=s) for s in range(3)]
        cfg = ChainConfig(steps=4, rng_seed=55)
        a = build_ensemble(g, seeds, 4, cfg)
        b = build_ensemble(g, seeds, 4, cfg)
        assert a == b
        assert a[0] == seeds[0]
        assert a[5] == seeds[1]
        assert a[10] == seeds[2]


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"steps": 0},
            {"steps": 1, "epsilon": 0.0},
            {"steps": 1, "epsilon": 1.0},
            {"steps": 1, "max_split_attempts": 0},
            {"steps": 1, "record_every": 0},
        ],
    )
    def test_bad_configs(self, kwargs):
        with pytest.raises(ValueError):
            ChainConfig(**kwargs)
