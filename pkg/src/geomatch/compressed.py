"""Per-cell compressed graphs: arc weights, shortest paths, expansions, candidates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hierarchy import A, B, Cell, CellId, Hierarchy
from .norms import pairwise
from .pathlets import MesTree, Pathlet, PathletStore
from .simplify import ReducingCycle, extend

INF = float("inf")

NONE, BRIDGE_FREE, BRIDGE_MATCH, INTERNAL = 0, 1, 2, 3
KIND_NAMES = {NONE: "none", BRIDGE_FREE: "bridge-nonmatching", BRIDGE_MATCH: "bridge-matching", INTERNAL: "internal"}


class Expansion:
    """Matching-edge sequence of an expansion plus its tips (A-to-B expansions only).

    The sequence is kept as the simplified pathlet list; a MES-tree over it
    is built only when a parent cell first uses this expansion as an arc.
    """

    __slots__ = ("xi", "tip_a", "tip_b", "adj", "_tree", "_store", "_cell")

    def __init__(self, xi: list[Pathlet], tip_a: int | None, tip_b: int | None, adj: float,
                 store: PathletStore | None = None, cell: CellId | None = None, tree: MesTree | None = None):
        self.xi = xi
        self.tip_a = tip_a
        self.tip_b = tip_b
        self.adj = adj
        self._tree = tree
        self._store = store
        self._cell = cell

    @classmethod
    def of_tree(cls, tree: MesTree) -> "Expansion":
        return cls([Pathlet.whole(tree)], None, None, tree.agg[3], tree=tree)

    @property
    def tree(self) -> MesTree | None:
        if self._tree is None and self.xi:
            xi = self.xi
            if len(xi) == 1 and xi[0].lo == 0 and xi[0].hi == xi[0].tree.m - 1:
                self._tree = xi[0].tree
            else:
                self._tree = self._store.concatenate(xi, self._cell)
        return self._tree

    def pathlets(self) -> list[Pathlet]:
        return list(self.xi)

    def __repr__(self) -> str:
        return f"Expansion(pathlets={len(self.xi)}, tips=({self.tip_a}, {self.tip_b}), adj={self.adj!r})"


@dataclass
class Candidate:
    cell: CellId
    x: int
    y: int
    key: float
    pathlets: list[Pathlet]
    tip_a: int
    tip_b: int


@dataclass
class PathTable:
    """Shortest-path distances, or a negative cycle as a node list."""

    dist: np.ndarray | None
    pred: np.ndarray | None
    cycle: list[int] | None = None

    def path(self, x: int, y: int) -> list[int]:
        """Node sequence of the shortest path from ``x`` to ``y``."""
        if not np.isfinite(self.dist[x, y]):
            raise ValueError("no path")
        nodes = [y]
        while nodes[-1] != x:
            nodes.append(int(self.pred[x, nodes[-1]]))
        nodes.reverse()
        return nodes


def weigh_bridge_arc(center_x: Sequence[float], center_y: Sequence[float], lam_len: float, kind: int,
                     present: bool, norm: str = "l2") -> float:
    """Weight of a bridge arc from subcell centers.

    ``kind`` is BRIDGE_FREE for an A-to-B arc and BRIDGE_MATCH for B-to-A;
    ``present`` says whether a usable non-matching pair (resp. matching edge) exists.
    """
    if not present:
        return INF
    d = float(pairwise(np.asarray([center_x], float), np.asarray([center_y], float), norm)[0, 0])
    return (d if kind == BRIDGE_FREE else -d) + lam_len


def apsp(weight: np.ndarray, tol: float | None = None) -> PathTable:
    """All-pairs shortest paths with negative-cycle detection.

    Bellman-Ford from a virtual source gives potentials or a negative cycle;
    with potentials, reduced weights are non-negative and Floyd-Warshall on
    them yields distances and a predecessor matrix rooted at each source.
    """
    s = weight.shape[0]
    w = np.asarray(weight, dtype=float)
    finite = np.isfinite(w)
    if tol is None:
        scale = float(np.abs(w[finite]).max()) if finite.any() else 1.0
        tol = 1e-9 * (1.0 + scale)
    pot = np.zeros(s)
    parent = np.full(s, -1, dtype=np.int64)
    last_changed = None
    for _ in range(s + 1):
        cand = pot[:, None] + w
        best_from = np.argmin(cand, axis=0)
        best = cand[best_from, np.arange(s)]
        changed = best < pot - tol
        if not changed.any():
            last_changed = None
            break
        pot = np.where(changed, best, pot)
        parent = np.where(changed, best_from, parent)
        last_changed = int(np.flatnonzero(changed)[0])
    if last_changed is not None:
        return PathTable(None, None, _extract_cycle(parent, last_changed, s))
    red = w + pot[:, None] - pot[None, :]
    red = np.where(finite, np.maximum(red, 0.0), INF)
    np.fill_diagonal(red, np.minimum(np.diag(red), 0.0))
    dist = red.copy()
    np.fill_diagonal(dist, 0.0)
    pred = np.tile(np.arange(s, dtype=np.int64)[:, None], (1, s))
    for k in range(s):
        alt = dist[:, k:k + 1] + dist[k:k + 1, :]
        better = alt < dist
        if better.any():
            dist = np.where(better, alt, dist)
            pred = np.where(better, pred[k:k + 1, :], pred)
    dist = dist - pot[:, None] + pot[None, :]
    dist[~np.isfinite(dist)] = INF
    return PathTable(dist, pred)


def _extract_cycle(parent: np.ndarray, start: int, s: int) -> list[int]:
    v = start
    for _ in range(s):
        v = int(parent[v])
    cycle = [v]
    u = int(parent[v])
    while u != v:
        cycle.append(u)
        u = int(parent[u])
    cycle.reverse()
    return cycle


def cycle_weight(weight: np.ndarray, cycle: Sequence[int]) -> float:
    return float(sum(weight[cycle[k], cycle[(k + 1) % len(cycle)]] for k in range(len(cycle))))


class CompressedGraph:
    """Compressed graph of one bichromatic cell and everything derived from it."""

    def __init__(self, cell: Cell, hierarchy: Hierarchy):
        self.cell = cell
        self.id = cell.id
        self.level = cell.level
        self.hier = hierarchy
        params = hierarchy.params
        self.lam_len = params.lam * (1 << cell.level)
        self.s = len(cell.clusters)
        self.n_a = cell.n_a
        colors = np.array([c.color for c in cell.clusters])
        self.opposite = colors[:, None] != colors[None, :]
        blocks = cell.blocks
        near = (np.abs(blocks[:, None, :] - blocks[None, :, :]) <= 1).all(axis=-1)
        if cell.level == 1:
            # no children below level 1: every arc is a bridge arc
            near[:] = False
        self.kind = np.full((self.s, self.s), NONE, dtype=np.int8)
        a_to_b = self.opposite & (colors[:, None] == A)
        b_to_a = self.opposite & (colors[:, None] == B)
        self.kind[self.opposite & near] = INTERNAL
        self.kind[a_to_b & ~near] = BRIDGE_FREE
        self.kind[b_to_a & ~near] = BRIDGE_MATCH
        self.center_dist = pairwise(cell.centers, cell.centers, params.norm)
        self.weight = np.full((self.s, self.s), INF)
        self.cert: dict[tuple[int, int], tuple[CellId, int, int]] = {}
        self.match_edge: dict[tuple[int, int], tuple[int, int]] = {}
        self.table: PathTable | None = None
        self.expansions: dict[tuple[int, int], Expansion] = {}
        self.adj = np.full((self.s, self.s), INF)
        self.candidate: Candidate | None = None
        self.stable = False
        self.version = 0
        self._arc_cache: dict[tuple[int, int], Expansion] = {}

    # (i) saturation ------------------------------------------------------

    def refresh_saturation(self, mate_a: Sequence[int], mate_b: Sequence[int]) -> None:
        for cl in self.cell.clusters:
            mates = mate_a if cl.color == A else mate_b
            cl.free = [p for p in cl.members if mates[p] < 0]

    # (ii) weights ----------------------------------------------------------

    def reweigh(self, mate_a: Sequence[int], graphs: dict[CellId, "CompressedGraph"]) -> None:
        cell, hier, s = self.cell, self.hier, self.s
        clusters = cell.clusters
        self.match_edge = {}
        self.cert = {}
        self._arc_cache = {}
        level = cell.level
        inside_b = set(cell.b_ids)
        for a in cell.a_ids:
            b = mate_a[a]
            if b < 0 or b not in inside_b:
                continue
            x = cell.lookup[(B, hier.subcell_of(hier.points_b[b], level))]
            y = cell.lookup[(A, hier.subcell_of(hier.points_a[a], level))]
            if self.kind[x, y] != BRIDGE_MATCH:
                continue
            cur = self.match_edge.get((x, y))
            length = hier_length(hier, a, b)
            if cur is None or (length, -a) > (hier_length(hier, cur[0], cur[1]), -cur[0]):
                self.match_edge[(x, y)] = (a, b)
        w = np.full((s, s), INF)
        bf = self.kind == BRIDGE_FREE
        w[bf] = self.center_dist[bf] + self.lam_len
        for x in range(self.n_a):
            cx = clusters[x]
            if len(cx.members) != 1:
                continue
            mate = mate_a[cx.members[0]]
            if mate < 0:
                continue
            for y in range(self.n_a, s):
                if self.kind[x, y] == BRIDGE_FREE and clusters[y].members == (mate,):
                    w[x, y] = INF
        for (x, y) in self.match_edge:
            w[x, y] = -self.center_dist[x, y] + self.lam_len
        self._weigh_internal(w, graphs)
        self.weight = w

    def _weigh_internal(self, w: np.ndarray, graphs: dict[CellId, "CompressedGraph"]) -> None:
        s = self.s
        vals, targets, xs_all, ys_all, owners = [], [], [], [], []
        for ci, child_id in enumerate(self.cell.children):
            g = graphs[child_id]
            mp = self.cell.child_maps[child_id]
            xs, ys = np.nonzero(np.isfinite(g.adj))
            if xs.size == 0:
                continue
            px, py = mp[xs], mp[ys]
            keep = self.kind[px, py] == INTERNAL
            if not keep.any():
                continue
            vals.append(g.adj[xs[keep], ys[keep]])
            targets.append(px[keep] * s + py[keep])
            xs_all.append(xs[keep])
            ys_all.append(ys[keep])
            owners.append(np.full(int(keep.sum()), ci))
        if not vals:
            return
        val = np.concatenate(vals)
        tgt = np.concatenate(targets)
        xs = np.concatenate(xs_all)
        ys = np.concatenate(ys_all)
        own = np.concatenate(owners)
        order = np.lexsort((ys, xs, own, val))
        tgt_sorted = tgt[order]
        uniq, first = np.unique(tgt_sorted, return_index=True)
        pick = order[first]
        flat = w.reshape(-1)
        flat[uniq] = val[pick] + self.lam_len
        children = self.cell.children
        for t, k in zip(uniq.tolist(), pick.tolist()):
            self.cert[divmod(t, s)] = (children[int(own[k])], int(xs[k]), int(ys[k]))

    # (iii) shortest paths ----------------------------------------------------

    def solve_paths(self) -> PathTable:
        self.table = apsp(self.weight)
        return self.table

    # arc expansions ------------------------------------------------------------

    def arc_expansion(self, x: int, y: int, store: PathletStore, graphs: dict[CellId, "CompressedGraph"],
                      mate_a: Sequence[int]) -> Expansion:
        hit = self._arc_cache.get((x, y))
        if hit is not None:
            return hit
        kind = self.kind[x, y]
        if kind == INTERNAL:
            child, dx, dy = self.cert[(x, y)]
            exp = graphs[child].expansions[(dx, dy)]
        elif kind == BRIDGE_MATCH:
            a, b = self.match_edge[(x, y)]
            exp = Expansion.of_tree(store.leaf_tree((a, b), self.id))
        elif kind == BRIDGE_FREE:
            a, b = self._bridge_pair(x, y, mate_a)
            exp = Expansion([], a, b, store.adj_free(a, b))
        else:
            raise ValueError("no arc between same-colored clusters")
        self._arc_cache[(x, y)] = exp
        return exp

    def _bridge_pair(self, x: int, y: int, mate_a: Sequence[int]) -> tuple[int, int]:
        cx, cy = self.cell.clusters[x], self.cell.clusters[y]
        free_a, free_b = set(cx.free), set(cy.free)
        order_a = sorted(cx.members, key=lambda p: (p not in free_a, p))
        order_b = sorted(cy.members, key=lambda p: (p not in free_b, p))
        for a in order_a:
            for b in order_b:
                if mate_a[a] != b:
                    return a, b
        raise ValueError("bridge arc without a non-matching pair")

    # (iv) expansions for all pairs -----------------------------------------------

    def build_expansions(self, store: PathletStore, graphs: dict[CellId, "CompressedGraph"],
                         mate_a: Sequence[int], audit: list | None = None) -> None:
        """Expansions of every opposite-colored pair; raises ReducingCycle on abort.

        Paths from one source share prefixes along the shortest-path tree, so
        each prefix is simplified once and extended arc by arc, carrying the
        adjusted cost of the open sequence along.
        """
        s, table = self.s, self.table
        colors = [c.color for c in self.cell.clusters]
        join = 1.0 + store.reg
        length = store.length
        agg = store.agg
        cache = self._arc_cache
        self.expansions = expansions = {}
        adj = np.full((s, s), INF)
        reach = np.isfinite(table.dist)
        for x in range(s):
            kids: list[list[int]] = [[] for _ in range(s)]
            ys = np.flatnonzero(reach[x]).tolist()
            for y, p in zip(ys, table.pred[x, ys].tolist()):
                if y != x:
                    kids[p].append(y)
            x_color = colors[x]
            x_is_a = x_color == A
            stack = [(x, [], 0.0, None)]
            while stack:
                u, xi, cost, tip_a = stack.pop()
                for y in reversed(kids[u]):
                    arc = cache.get((u, y))
                    if arc is None:
                        arc = self.arc_expansion(u, y, store, graphs, mate_a)
                    tree = arc.tree
                    if tree is None:
                        nxt, ncost = xi, cost
                    else:
                        phi = Pathlet(tree, 0, tree.offsets[-1] - 1)
                        nxt = extend(store, xi, phi, audit)
                        if len(nxt) == len(xi) + 1 and nxt[-1] is phi:
                            g = tree.agg
                            ncost = cost + g[3]
                            if xi:
                                ncost += join * length(agg(xi[-1])[2], g[1])
                        else:
                            ncost = store.adj_cost(nxt)
                    ta = arc.tip_a if (u == x and x_is_a) else tip_a
                    if colors[y] != x_color:
                        if x_is_a:
                            tb = arc.tip_b
                            if nxt:
                                total = ncost + join * (length(ta, agg(nxt[0])[1]) + length(agg(nxt[-1])[2], tb))
                            else:
                                total = join * length(ta, tb)
                            exp = Expansion(nxt, ta, tb, total, store, self.id)
                        else:
                            exp = Expansion(nxt, None, None, ncost, store, self.id)
                        expansions[(x, y)] = exp
                        adj[x, y] = exp.adj
                    stack.append((y, nxt, ncost, ta))
        self.adj = adj

    def cycle_pathlets(self, cycle: Sequence[int], store: PathletStore, graphs, mate_a) -> list[Pathlet]:
        out: list[Pathlet] = []
        for k in range(len(cycle)):
            arc = self.arc_expansion(cycle[k], cycle[(k + 1) % len(cycle)], store, graphs, mate_a)
            out.extend(arc.pathlets())
        return out

    # (v) candidate --------------------------------------------------------------

    def select_candidate(self, store: PathletStore) -> Candidate | None:
        clusters = self.cell.clusters
        best: Candidate | None = None
        for x in range(self.n_a):
            fa = clusters[x].free
            if not fa:
                continue
            for y in range(self.n_a, self.s):
                fb = clusters[y].free
                if not fb:
                    continue
                exp = self.expansions.get((x, y))
                if exp is None:
                    continue
                pls = exp.pathlets()
                if pls:
                    first_b, last_a = store.agg(pls[0])[1], store.agg(pls[-1])[2]
                    ta = min(fa, key=lambda a: (store.length(a, first_b), a))
                    tb = min(fb, key=lambda b: (store.length(last_a, b), b))
                else:
                    _, ta, tb = min((store.length(a, b), a, b) for a in fa for b in fb)
                key = store.adj_cost(pls, ta, tb)
                if best is None or key < best.key:
                    best = Candidate(self.id, x, y, key, pls, ta, tb)
        self.candidate = best
        return best

    # debugging -------------------------------------------------------------------

    def dump(self) -> str:
        cid = self.id
        head = f"{cid.level} {''.join(map(str, cid.shift))} {','.join(map(str, cid.anchor))}"
        lines = []
        for x in range(self.s):
            for y in range(self.s):
                kind = self.kind[x, y]
                if kind == NONE:
                    continue
                line = f"{head} | {x} {y} {KIND_NAMES[int(kind)]} {float(self.weight[x, y])!r}"
                cert = self.cert.get((x, y))
                if cert is not None:
                    c, dx, dy = cert
                    line += f" [{c.level} {''.join(map(str, c.shift))} {','.join(map(str, c.anchor))} {dx} {dy}]"
                lines.append(line)
        return "\n".join(lines)


def hier_length(hier: Hierarchy, a: int, b: int) -> float:
    return hier.dist(hier.points_a[a], hier.points_b[b])
