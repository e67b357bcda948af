import itertools
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lecsum import select
from lecsum.core import SchemaError
from lecsum.select import (InstanceTooLargeError, SelectionProblem, cluster_assignment, exhaustive_select,
                           greedy_select, kmedoid_select, objective)


def _problem(D, I, m=4):
    return SelectionProblem.from_arrays(np.asarray(D, float), np.asarray(I, float), m)


def _sym(rng, n):
    D = np.triu(rng.uniform(0, 1, (n, n)), 1)
    return D + D.T


def test_objective_examples():
    D = np.array([[0, 0.4, 0.9], [0.4, 0, 0.5], [0.9, 0.5, 0]])
    p = _problem(D, [1, 0.5, 0.5], m=1)
    assert objective(p, {0}) == pytest.approx(0.45)
    assert objective(p, {0, 1, 2}) == 0


def test_objective_rejects_bad_sets():
    p = _problem(np.zeros((2, 2)), [1, 1])
    with pytest.raises(SchemaError):
        objective(p, set())
    with pytest.raises(SchemaError):
        objective(p, {5})


def test_exhaustive_matches_brute_force(rng):
    p = _problem(_sym(rng, 8), rng.uniform(0.01, 1, 8))
    best = min(objective(p, S) for S in itertools.combinations(range(8), 4))
    assert exhaustive_select(p).objective == best


def test_small_segments_keep_everything():
    p = _problem(np.array([[0, 0.3], [0.3, 0]]), [1, 1])
    for solve in (greedy_select, exhaustive_select, kmedoid_select):
        s = solve(p)
        assert s.selected == (0, 1) and s.objective == 0


def test_greedy_drops_near_duplicate():
    D = np.full((5, 5), 0.9)
    np.fill_diagonal(D, 0)
    D[0, 1] = D[1, 0] = 0.02
    s = greedy_select(_problem(D, [1.0, 0.3, 0.8, 0.9, 0.7]))
    assert s.selected == (0, 2, 3, 4)


def test_greedy_ties_break_by_id():
    D = np.full((5, 5), 0.5)
    np.fill_diagonal(D, 0)
    assert greedy_select(_problem(D, np.ones(5))).selected == (1, 2, 3, 4)


def test_two_clusters_exhaustive():
    D = np.full((6, 6), 0.9)
    for grp in ((0, 1, 2), (3, 4, 5)):
        for i, j in itertools.permutations(grp, 2):
            D[i, j] = 0.05
    np.fill_diagonal(D, 0)
    s = exhaustive_select(_problem(D, np.ones(6)))
    assert s.objective <= 0.05
    assert sum(i < 3 for i in s.selected) >= 1 and sum(i >= 3 for i in s.selected) >= 1
    assert s.objective == 0.05


def test_exhaustive_n20_not_worse_than_greedy(rng):
    p = _problem(_sym(rng, 20), rng.uniform(0.01, 1, 20))
    assert exhaustive_select(p).objective <= greedy_select(p).objective


def test_exhaustive_guard(rng):
    p = _problem(_sym(rng, 30), np.ones(30))
    with pytest.raises(InstanceTooLargeError):
        exhaustive_select(p, limit=1000)


def test_kmedoid_one_per_cluster(rng):
    labels = np.repeat(np.arange(4), 3)
    D = np.where(labels[:, None] == labels[None, :], 0.05, 0.95)
    np.fill_diagonal(D, 0)
    imp = np.full(12, 0.5)
    imp[[0, 1, 2]] = 1.0  # importance seeding starts with cluster 0 thrice
    s = kmedoid_select(_problem(D, imp))
    assert sorted(labels[list(s.selected)]) == [0, 1, 2, 3]
    assert cluster_assignment(_problem(D, imp), s.selected) == [s.selected[k] for k in labels]


def test_fig1_methods_agree(fig1_result):
    p = SelectionProblem(fig1_result.distance, fig1_result.importance, 4, "fig1")
    frozen = (0, 3, 4, 5)
    assert greedy_select(p).selected == frozen
    assert exhaustive_select(p).selected == frozen
    assert kmedoid_select(p).selected == frozen


def test_instance_file_round_trip(tmp_path, rng):
    p = _problem(_sym(rng, 7), rng.uniform(0.01, 1, 7), m=3)
    select.save_instance(p, tmp_path / "i.json")
    q = select.load_instance(tmp_path / "i.json")
    assert q.D == p.D and q.I == p.I and q.m == 3


def test_unknown_method():
    with pytest.raises(SchemaError):
        select.solve(_problem(np.zeros((1, 1)), [1]), "annealing")


def test_planted_generator_structure():
    rng = np.random.default_rng(0)
    p = select.planted_instance(rng, 10)
    D = p.D.values
    assert D.max() <= 1 and np.allclose(D, D.T)
    assert np.sum(D[np.triu_indices(10, 1)] <= 0.1) >= 1


@settings(max_examples=60)
@given(st.integers(0, 2**31), st.integers(5, 10), st.integers(1, 5))
def test_greedy_never_beats_optimum(seed, n, m):
    rng = np.random.default_rng(seed)
    p = _problem(_sym(rng, n), rng.uniform(1e-6, 1, n), m)
    g, e = greedy_select(p), exhaustive_select(p)
    assert e.objective <= g.objective
    assert len(g.selected) == len(e.selected) == min(m, n)
    assert g.objective == objective(p, g.selected)


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(4, 12))
def test_planted_greedy_is_optimal(seed, n):
    p = select.planted_instance(np.random.default_rng(seed), n)
    assert greedy_select(p).objective == exhaustive_select(p).objective


def test_greedy_speed_n100(rng):
    p = _problem(_sym(rng, 100), rng.uniform(0.01, 1, 100))
    t = time.perf_counter()
    greedy_select(p)
    assert time.perf_counter() - t < 1.0
