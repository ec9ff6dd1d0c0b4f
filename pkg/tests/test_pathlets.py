import math
import random

from hypothesis import given, settings, strategies as st

from geomatch.hierarchy import CellId
from geomatch.norms import distance_fn
from geomatch.pathlets import EdgeRef, Pathlet, PathletStore, update_intersection_tables

REG = 0.125


class Forest:
    """Random MES-trees together with their edge lists built independently."""

    def __init__(self, seed: int, n_points: int = 10, rounds: int = 3):
        rnd = random.Random(seed)
        self.rnd = rnd
        pts_a = [(rnd.randrange(64), rnd.randrange(64)) for _ in range(n_points)]
        pts_b = [(rnd.randrange(64), rnd.randrange(64)) for _ in range(n_points)]
        self.store = PathletStore(pts_a, pts_b, distance_fn("l2"), REG)
        self.lists = {}
        self.trees = []
        edges = [(a, b) for a in range(n_points) for b in range(n_points)]
        for _ in range(rnd.randint(3, 6)):
            t = self.store.leaf_tree(rnd.choice(edges), CellId(7, (0, 0), (0, 0)))
            self._add(t, [t.kid_edge[0]])
        for level in range(8, 8 + rounds):
            for _ in range(rnd.randint(2, 4)):
                parts = [self.random_pathlet() for _ in range(rnd.randint(1, 4))]
                parts = [p for p in parts if p.lo <= p.hi]
                if not parts:
                    continue
                t = self.store.concatenate(parts, CellId(level, (0, 0), (0, 0)))
                self._add(t, [e for p in parts for e in self.model(p)])

    def _add(self, tree, edges):
        self.trees.append(tree)
        self.lists[tree.uid] = edges
        assert len(edges) == tree.m

    def random_pathlet(self, allow_empty=False) -> Pathlet:
        t = self.rnd.choice(self.trees)
        lo = self.rnd.randrange(t.m)
        hi = self.rnd.randrange(lo - (1 if allow_empty else 0), t.m)
        return Pathlet(t, lo, hi)

    def simple_pathlet(self) -> Pathlet:
        """A pathlet without repeated edges, like every expansion the matcher builds."""
        while True:
            p = self.random_pathlet()
            edges = self.model(p)
            if len(edges) == len(set(edges)):
                return p

    def model(self, p: Pathlet):
        return self.lists[p.tree.uid][p.lo:p.hi + 1]

    def by_uid(self, uid):
        return next(t for t in self.trees if t.uid == uid)


def model_cost(store, edges, tip_a=None, tip_b=None, cycle=False):
    L = lambda a, b: store.dist(store.pa[a], store.pb[b])
    cost = length = 0.0
    for a, b in edges:
        cost += (REG - 1) * L(a, b)
        length += L(a, b)
    links = [(edges[k][0], edges[k + 1][1]) for k in range(len(edges) - 1)]
    if cycle:
        links.append((edges[-1][0], edges[0][1]))
    else:
        if tip_a is not None:
            links.append((tip_a, edges[0][1]) if edges else (tip_a, tip_b))
        if tip_b is not None and edges:
            links.append((edges[-1][0], tip_b))
    for a, b in links:
        cost += (1 + REG) * L(a, b)
        length += L(a, b)
    return cost, length


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_edges_and_median_match_the_model(seed):
    f = Forest(seed)
    for _ in range(20):
        p = f.random_pathlet()
        assert f.store.edges(p) == f.model(p)
        k = p.hi - p.lo + 1
        ref = f.store.median(p)
        assert ref.pos == p.lo + math.ceil(k / 2) - 1
        assert f.store.resolve(ref) == f.model(p)[math.ceil(k / 2) - 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_intersects_and_last_common_edge_match_the_model(seed):
    f = Forest(seed)
    for _ in range(40):
        p1, p2 = f.random_pathlet(), f.random_pathlet()
        e1s, e2s = f.model(p1), f.model(p2)
        common = set(e1s) & set(e2s)
        assert f.store.intersects(p1, p2) == bool(common)
        if not common:
            continue
        e1, e2, e3, e4 = f.store.last_common_edge(p1, p2)
        last = max(i for i, e in enumerate(e1s) if e in common)
        assert e1.pos == p1.lo + last
        edge = e1s[last]
        assert f.store.resolve(e2) == edge and p2.lo <= e2.pos <= p2.hi
        assert e2.pos - p2.lo in [i for i, e in enumerate(e2s) if e == edge]
        assert (e3 is None) == (last == 0)
        if e3 is not None:
            assert e3.pos == e1.pos - 1
        assert (e4 is None) == (e2.pos == p2.lo)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_table_entries_agree_with_materialized_edges(seed):
    f = Forest(seed, rounds=4)
    for _ in range(40):
        f.store.intersects(f.random_pathlet(), f.random_pathlet())
    written = update_intersection_tables(f.store, f.trees, f.trees)
    assert written >= 0
    for (k1, k2), verdict in f.store.table.entries.items():
        s1 = set(f.lists[k1[0]][k1[1]:k1[2] + 1])
        s2 = set(f.lists[k2[0]][k2[1]:k2[2] + 1])
        assert verdict == bool(s1 & s2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_adjusted_cost_and_report(seed):
    f = Forest(seed)
    store = f.store
    for _ in range(10):
        parts = [f.random_pathlet() for _ in range(f.rnd.randint(1, 3))]
        edges = [e for p in parts for e in f.model(p)]
        ta, tb = f.rnd.randrange(10), f.rnd.randrange(10)
        got = store.cost_and_length(parts, ta, tb)
        want = model_cost(store, edges, ta, tb)
        assert math.isclose(got[0], want[0], rel_tol=1e-12, abs_tol=1e-9)
        assert math.isclose(got[1], want[1], rel_tol=1e-12, abs_tol=1e-9)
        cyc = store.cost_and_length(parts, cycle=True)
        assert math.isclose(cyc[0], model_cost(store, edges, cycle=True)[0], rel_tol=1e-12, abs_tol=1e-9)
        steps = store.report(parts, ta, tb)
        assert [(a, b) for a, b, m in steps if m] == edges
        assert steps[0] == (ta, edges[0][1], False) and steps[-1] == (edges[-1][0], tb, False)
        assert all(steps[k][2] != steps[k + 1][2] for k in range(len(steps) - 1))


def test_empty_expansion_costs_the_tip_edge():
    store = PathletStore([(0, 0)], [(3, 4)], distance_fn("l2"), REG)
    assert store.adj_cost([], 0, 0) == (1 + REG) * 5.0
    assert store.report([], 0, 0) == [(0, 0, False)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_splice_operators(seed):
    f = Forest(seed)
    for _ in range(10):
        p = f.random_pathlet()
        pos = f.rnd.randint(p.lo, p.hi)
        ref = EdgeRef(p.tree, pos)
        k = pos - p.lo
        model = f.model(p)
        assert f.model(f.store.splice(p, ref, "from")) == model[k:]
        assert f.model(f.store.splice(p, ref, "upto")) == model[:k + 1]
        assert f.model(f.store.splice(p, ref, "before")) == model[:k]
