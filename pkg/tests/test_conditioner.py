import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from geomatch.conditioner import (
    RawInstance,
    beta_range,
    build_spanner,
    coarse_estimate,
    condition,
    solve,
)
from geomatch.hierarchy import ConstantsConfig
from geomatch.oracle import cost_matrix, hungarian
from geomatch.norms import pairwise
from _support import bracket_beta, random_instance


def spanner_stretch(inst, norm="l2"):
    pts = np.asarray(inst.all_points(), dtype=float)
    m = len(pts)
    edges = build_spanner(inst, norm)
    rows = [i for i, j, _ in edges] + [j for i, j, _ in edges]
    cols = [j for i, j, _ in edges] + [i for i, j, _ in edges]
    # zero-weight edges vanish from a sparse matrix, so nudge them
    vals = [max(w, 1e-300) for _, _, w in edges] * 2
    g = csr_matrix((vals, (rows, cols)), shape=(m, m))
    sp = dijkstra(g, directed=False)
    direct = pairwise(pts, pts, norm)
    mask = direct > 0
    return float((sp[mask] / direct[mask]).max()) if mask.any() else 1.0, len(edges)


def test_two_point_spanner_is_the_edge():
    inst = RawInstance.from_points([(0.0, 0.0)], [(3.0, 4.0)])
    assert build_spanner(inst) == [(0, 1, 5.0)]


@pytest.mark.parametrize("norm", ["l2", "l1", "linf"])
def test_random_spanner_stretch(norm):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        pts = rng.random((10, 2)) * 100
        inst = RawInstance.from_points(pts[:5], pts[5:])
        stretch, _ = spanner_stretch(inst, norm)
        assert stretch <= 2.0


def test_collinear_spanner_stretch():
    inst = RawInstance.from_points([(float(i),) for i in range(5)], [(float(i),) for i in range(5, 10)])
    assert spanner_stretch(inst)[0] <= 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 60))
def test_spanner_stretch_and_sparsity(seed, n):
    inst = random_instance(seed, n, 2, "clustered")
    stretch, m = spanner_stretch(inst)
    assert stretch <= 2.0
    assert m <= 60 * 2 * n


def test_coarse_estimate_single_edge():
    inst = RawInstance.from_points([(0.0,)], [(5.0,)])
    assert coarse_estimate(inst).w0 == 5.0 == hungarian(inst.points_a, inst.points_b).cost


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 40), st.sampled_from(["uniform", "clustered", "grid"]))
def test_coarse_estimate_brackets_the_optimum(seed, n, dist):
    inst = random_instance(seed, n, 2, dist)
    w0 = coarse_estimate(inst).w0
    opt = hungarian(inst.points_a, inst.points_b).cost
    assert w0 / 2 <= opt + 1e-12
    if n == 1:
        assert opt == pytest.approx(w0, rel=1e-12)
    else:
        assert opt < n * n * w0 or opt == w0 == 0


def test_coincident_sets_give_zero_estimate():
    pts = [(1.0, 2.0), (3.0, 4.0)]
    inst = RawInstance.from_points(pts, pts)
    assert coarse_estimate(inst).w0 == 0.0
    r = solve(inst, 0.5)
    assert r.cost == 0.0 and sorted(r.pairs) == [(0, 0), (1, 1)]


def test_conditioning_hand_example():
    inst = RawInstance.from_points([(0.0, 0.0)], [(1.0, 0.0)])
    ci = condition(inst, 1.0, 1.0)
    assert ci.scale == pytest.approx(8 * math.sqrt(2))
    assert ci.points_a == [(0, 0)] and ci.points_b == [(11, 0)]
    opt = hungarian(ci.points_a, ci.points_b).cost
    assert 3 * math.sqrt(2) <= opt <= 9 * math.sqrt(2)


def test_colocated_points_are_prematched():
    inst = RawInstance.from_points([(0.5, 0.5), (0.0, 0.0)], [(0.9, 0.9), (0.5, 0.5)])
    ci = condition(inst, 0.5, 1.0)
    assert ci.pre_matched == [(0, 1)]
    assert ci.a_raw == [1] and ci.b_raw == [0]


def test_rejects_bad_eps_and_coordinates():
    inst = RawInstance.from_points([(0.0,)], [(1.0,)])
    for eps in (0.0, -1.0, 1.5, math.nan):
        with pytest.raises(ValueError):
            condition(inst, eps, 1.0)
        with pytest.raises(ValueError):
            solve(inst, eps)
    with pytest.raises(ValueError):
        RawInstance.from_points([(math.inf,)], [(1.0,)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 24))
def test_bracketing_guess_lands_in_the_conditioned_range(seed, n):
    inst = random_instance(seed, n, 2)
    beta = bracket_beta(inst)
    ci = condition(inst, 0.5, beta)
    opt = hungarian(ci.points_a, ci.points_b).cost if ci.n else 0.0
    opt_raw = hungarian(inst.points_a, inst.points_b).cost
    k = math.sqrt(2)
    # rounding moves each point by at most k/2
    assert abs(opt - ci.scale * opt_raw) <= k * n + 1e-9
    assert 3 * k * n / 0.5 <= opt <= 9 * k * n / 0.5


def test_solve_single_pair():
    inst = RawInstance.from_points([(0.0, 0.0)], [(3.0, 4.0)])
    r = solve(inst, 0.25)
    assert r.pairs == [(0, 0)] and r.cost == 5.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 10), st.sampled_from(["l2", "l1", "linf"]))
def test_solve_is_a_deterministic_near_optimal_bijection(seed, n, norm):
    inst = random_instance(seed, n, 2)
    r1 = solve(inst, 0.5, ConstantsConfig.theory(), norm)
    r2 = solve(inst, 0.5, ConstantsConfig.theory(), norm)
    assert r1.pairs == r2.pairs and r1.cost == r2.cost
    assert sorted(a for a, _ in r1.pairs) == list(range(n))
    assert sorted(b for _, b in r1.pairs) == list(range(n))
    opt = hungarian(inst.points_a, inst.points_b, norm).cost
    assert r1.cost <= 1.5 * opt + 1e-12


def test_beta_range_covers_the_spread():
    assert list(beta_range(1)) == [-1, 0]
    assert list(beta_range(8)) == list(range(-1, 7))
