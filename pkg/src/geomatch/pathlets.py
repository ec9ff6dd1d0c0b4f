"""Compact matching-edge sequences (MES-trees), pathlets and their queries.

A matching edge is the pair ``(a, b)`` of an A-point id and a B-point id; in
an alternating path it is traversed from ``b`` to ``a``.  A MES-tree stores
the matching edges of an expansion.  Its root children are either single
leaves (bridge edges of the owning cell) or slices of lower trees, so every
tree has height bounded by its cell level.  Trees never change after they
are built; a slice ``Pathlet(tree, lo, hi)`` names leaf positions ``lo..hi``
of ``tree``.
"""

from __future__ import annotations

from bisect import bisect_right
from functools import lru_cache
from typing import Callable, Iterable, NamedTuple, Sequence

from .hierarchy import CellId

Edge = tuple[int, int]
# (edge count, first b id, last a id, adjusted cost, euclidean length)
Agg = tuple[int, int, int, float, float]


@lru_cache(maxsize=None)
def _box(cell: CellId) -> tuple[tuple, int]:
    return (cell.anchor, cell.side)


class MesTree:
    __slots__ = (
        "uid", "cell", "level", "box", "kid_tree", "kid_lo", "kid_hi", "kid_edge",
        "offsets", "kid_aggs", "agg", "memo", "single_leaf",
    )

    def __init__(self, uid: int, cell: CellId):
        self.uid = uid
        self.cell = cell
        self.level = cell.level
        self.box = _box(cell)
        self.kid_tree: list[MesTree | None] = []
        self.kid_lo: list[int] = []
        self.kid_hi: list[int] = []
        self.kid_edge: list[Edge | None] = []
        self.offsets: list[int] = [0]
        self.kid_aggs: list[Agg] = []
        self.agg: Agg | None = None
        self.memo: dict[tuple[int, int], Agg] = {}
        self.single_leaf = False

    @property
    def m(self) -> int:
        return self.offsets[-1]

    def __len__(self) -> int:
        return self.offsets[-1]

    def __repr__(self) -> str:
        return f"MesTree(#{self.uid}, level={self.level}, m={self.m}, kids={len(self.kid_aggs)})"


class Pathlet(NamedTuple):
    tree: MesTree
    lo: int
    hi: int

    @property
    def size(self) -> int:
        return max(0, self.hi - self.lo + 1)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.tree.uid, self.lo, self.hi)

    @classmethod
    def whole(cls, tree: MesTree) -> "Pathlet":
        return cls(tree, 0, tree.m - 1)


class EdgeRef(NamedTuple):
    tree: MesTree
    pos: int


class _Node:
    """A node of the implicit tree of a pathlet, restricted to a leaf range."""

    __slots__ = ("tree", "lo", "hi", "pos", "edge")

    def __init__(self, tree: MesTree, lo: int, hi: int, pos: int, edge: Edge | None = None):
        self.tree = tree
        self.lo = lo
        self.hi = hi
        self.pos = pos
        self.edge = edge


def _disjoint(b1, b2) -> bool:
    (a1, s1), (a2, s2) = b1, b2
    for x, y in zip(a1, a2):
        if x + s1 <= y or y + s2 <= x:
            return True
    return False


def _inside(p, box) -> bool:
    anchor, side = box
    for x, a in zip(p, anchor):
        if x < a or x >= a + side:
            return False
    return True


class IntersectionTable:
    """Verdicts for pairs of canonical pathlets, keyed by ``(tree id, lo, hi)`` pairs.

    A canonical pathlet determines the arc it was produced for (each tree is
    the expansion of exactly one arc), so the pathlet keys identify the arcs too.
    """

    def __init__(self, limit: int | None = 4_000_000):
        self.entries: dict[tuple, bool] = {}
        self.limit = limit
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(k1: tuple[int, int, int], k2: tuple[int, int, int]) -> tuple:
        return (k1, k2) if k1 <= k2 else (k2, k1)

    def get(self, k1, k2) -> bool | None:
        r = self.entries.get(self.key(k1, k2))
        if r is None:
            self.misses += 1
        else:
            self.hits += 1
        return r

    def put(self, k1, k2, value: bool) -> None:
        if self.limit is not None and len(self.entries) >= self.limit:
            self.entries.clear()
        self.entries[self.key(k1, k2)] = value

    def __len__(self) -> int:
        return len(self.entries)


class PathletStore:
    """Builds MES-trees and answers pathlet queries for one matcher run."""

    def __init__(
        self,
        points_a: Sequence[Sequence[int]],
        points_b: Sequence[Sequence[int]],
        dist: Callable[[Sequence[int], Sequence[int]], float],
        reg: float,
    ):
        self.pa = points_a
        self.pb = points_b
        self.dist = dist
        self.reg = reg
        self.table = IntersectionTable()
        self._find_memo: dict[tuple, int] = {}
        self._lengths: dict[Edge, float] = {}
        self._next_uid = 0

    # edge costs ---------------------------------------------------------

    def length(self, a: int, b: int) -> float:
        key = (a, b)
        v = self._lengths.get(key)
        if v is None:
            v = self._lengths[key] = self.dist(self.pa[a], self.pb[b])
        return v

    def adj_match(self, a: int, b: int) -> float:
        return (self.reg - 1.0) * self.length(a, b)

    def adj_free(self, a: int, b: int) -> float:
        return (1.0 + self.reg) * self.length(a, b)

    # construction -------------------------------------------------------

    def _new_tree(self, cell: CellId) -> MesTree:
        t = MesTree(self._next_uid, cell)
        self._next_uid += 1
        return t

    def leaf_tree(self, edge: Edge, cell: CellId) -> MesTree:
        """Tree of a single bridge matching edge."""
        t = self._new_tree(cell)
        t.single_leaf = True
        self._append_leaf(t, edge)
        t.agg = t.kid_aggs[0]
        return t

    def _append_leaf(self, t: MesTree, edge: Edge) -> None:
        a, b = edge
        t.kid_tree.append(None)
        t.kid_lo.append(0)
        t.kid_hi.append(0)
        t.kid_edge.append(edge)
        t.kid_aggs.append((1, b, a, self.adj_match(a, b), self.length(a, b)))
        t.offsets.append(t.offsets[-1] + 1)

    def concatenate(self, pathlets: Iterable[Pathlet], cell: CellId) -> MesTree:
        """New tree whose root children are the given (nonempty) pathlets."""
        t = self._new_tree(cell)
        for p in pathlets:
            if p.lo > p.hi:
                continue
            if p.tree.single_leaf:
                self._append_leaf(t, p.tree.kid_edge[0])
                continue
            t.kid_tree.append(p.tree)
            t.kid_lo.append(p.lo)
            t.kid_hi.append(p.hi)
            t.kid_edge.append(None)
            t.kid_aggs.append(self.agg(p))
            t.offsets.append(t.offsets[-1] + p.hi - p.lo + 1)
        if not t.kid_aggs:
            raise ValueError("cannot build a tree from empty pathlets")
        agg = t.kid_aggs[0]
        for nxt in t.kid_aggs[1:]:
            agg = self._join(agg, nxt)
        t.agg = agg
        return t

    # aggregates ---------------------------------------------------------

    def _join(self, x: Agg, y: Agg) -> Agg:
        a, b = x[2], y[1]
        link = self.length(a, b)
        return (x[0] + y[0], x[1], y[2], x[3] + y[3] + (1.0 + self.reg) * link, x[4] + y[4] + link)

    def agg(self, p: Pathlet) -> Agg:
        t, lo, hi = p
        if lo > hi:
            raise ValueError("empty pathlet has no aggregate")
        if lo == 0 and hi == t.offsets[-1] - 1:
            return t.agg
        hit = t.memo.get((lo, hi))
        if hit is not None:
            return hit
        out = None
        offs = t.offsets
        i = bisect_right(offs, lo) - 1
        while i < len(t.kid_aggs) and offs[i] <= hi:
            off, end = offs[i], offs[i + 1] - 1
            s, e = max(lo, off), min(hi, end)
            if s == off and e == end:
                part = t.kid_aggs[i]
            else:
                sub = t.kid_tree[i]
                part = self.agg(Pathlet(sub, t.kid_lo[i] + s - off, t.kid_lo[i] + e - off))
            out = part if out is None else self._join(out, part)
            i += 1
        t.memo[(lo, hi)] = out
        return out

    def cost_and_length(
        self,
        pathlets: Sequence[Pathlet],
        tip_a: int | None = None,
        tip_b: int | None = None,
        cycle: bool = False,
    ) -> tuple[float, float]:
        """Adjusted cost and euclidean length of a compact representation."""
        aggs = [self.agg(p) for p in pathlets if p.lo <= p.hi]
        if cycle and (tip_a is not None or tip_b is not None):
            raise ValueError("a cycle carries no tips")
        if not aggs:
            if cycle or tip_a is None or tip_b is None:
                raise ValueError("empty representation needs both tips")
            L = self.length(tip_a, tip_b)
            return (1.0 + self.reg) * L, L
        cost = 0.0
        length = 0.0
        prev = None
        for g in aggs:
            cost += g[3]
            length += g[4]
            if prev is not None:
                L = self.length(prev[2], g[1])
                cost += (1.0 + self.reg) * L
                length += L
            prev = g
        ends = []
        if cycle:
            ends.append((aggs[-1][2], aggs[0][1]))
        else:
            if tip_a is not None:
                ends.append((tip_a, aggs[0][1]))
            if tip_b is not None:
                ends.append((aggs[-1][2], tip_b))
        for a, b in ends:
            L = self.length(a, b)
            cost += (1.0 + self.reg) * L
            length += L
        return cost, length

    def adj_cost(self, pathlets, tip_a=None, tip_b=None, cycle=False) -> float:
        return self.cost_and_length(pathlets, tip_a, tip_b, cycle)[0]

    # materialization ----------------------------------------------------

    def edges(self, p: Pathlet) -> list[Edge]:
        """Matching edges of a pathlet by depth-first leaf enumeration."""
        out: list[Edge] = []
        self._collect(p.tree, p.lo, p.hi, out)
        return out

    def _collect(self, t: MesTree, lo: int, hi: int, out: list[Edge]) -> None:
        if lo > hi:
            return
        offs = t.offsets
        i = bisect_right(offs, lo) - 1
        while i < len(t.kid_aggs) and offs[i] <= hi:
            off, end = offs[i], offs[i + 1] - 1
            s, e = max(lo, off), min(hi, end)
            if t.kid_edge[i] is not None:
                out.append(t.kid_edge[i])
            else:
                self._collect(t.kid_tree[i], t.kid_lo[i] + s - off, t.kid_lo[i] + e - off, out)
            i += 1

    def report(
        self,
        pathlets: Sequence[Pathlet],
        tip_a: int | None = None,
        tip_b: int | None = None,
        cycle: bool = False,
    ) -> list[tuple[int, int, bool]]:
        """Full alternating sequence as ``(a, b, is_matching)`` triples in path order."""
        mes: list[Edge] = []
        for p in pathlets:
            self._collect(p.tree, p.lo, p.hi, mes)
        out: list[tuple[int, int, bool]] = []
        if not mes:
            if tip_a is None or tip_b is None:
                raise ValueError("empty representation needs both tips")
            return [(tip_a, tip_b, False)]
        if tip_a is not None and not cycle:
            out.append((tip_a, mes[0][1], False))
        for k, (a, b) in enumerate(mes):
            out.append((a, b, True))
            if k + 1 < len(mes):
                out.append((a, mes[k + 1][1], False))
        if cycle:
            out.append((mes[-1][0], mes[0][1], False))
        elif tip_b is not None:
            out.append((mes[-1][0], tip_b, False))
        return out

    # positional access ---------------------------------------------------

    def resolve(self, ref: EdgeRef) -> Edge:
        t, pos = ref.tree, ref.pos
        while True:
            i = bisect_right(t.offsets, pos) - 1
            if t.kid_edge[i] is not None:
                return t.kid_edge[i]
            pos = t.kid_lo[i] + pos - t.offsets[i]
            t = t.kid_tree[i]

    def spine(self, ref: EdgeRef) -> list[int]:
        """Child indices along the root-to-leaf path of an edge reference."""
        path = []
        t, pos = ref.tree, ref.pos
        while True:
            i = bisect_right(t.offsets, pos) - 1
            path.append(i)
            if t.kid_edge[i] is not None:
                return path
            pos = t.kid_lo[i] + pos - t.offsets[i]
            t = t.kid_tree[i]

    def median(self, p: Pathlet) -> EdgeRef:
        k = p.hi - p.lo + 1
        if k <= 0:
            raise ValueError("median of an empty pathlet")
        return EdgeRef(p.tree, p.lo + (k + 1) // 2 - 1)

    def splice(self, p: Pathlet, ref: EdgeRef, op: str) -> Pathlet:
        """``from`` keeps e and what follows, ``upto`` keeps e and what precedes,
        ``before`` keeps what precedes e."""
        if ref.tree is not p.tree or not p.lo <= ref.pos <= p.hi:
            ref = self.locate(p, self.resolve(ref))
            if ref is None:
                raise ValueError("edge is not in the pathlet")
        if op == "from":
            return Pathlet(p.tree, ref.pos, p.hi)
        if op == "upto":
            return Pathlet(p.tree, p.lo, ref.pos)
        if op == "before":
            return Pathlet(p.tree, p.lo, ref.pos - 1)
        raise ValueError(f"unknown splice {op!r}")

    # canonical decomposition ---------------------------------------------

    def canonical(self, p: Pathlet) -> list[_Node]:
        out: list[_Node] = []
        if p.lo <= p.hi:
            self._canon(p.tree, p.lo, p.hi, p.lo, out)
        return out

    def _canon(self, t: MesTree, lo: int, hi: int, pos: int, out: list[_Node]) -> None:
        if lo == 0 and hi == t.offsets[-1] - 1:
            out.append(_Node(t, lo, hi, pos))
            return
        offs = t.offsets
        i = bisect_right(offs, lo) - 1
        while i < len(t.kid_aggs) and offs[i] <= hi:
            off, end = offs[i], offs[i + 1] - 1
            s, e = max(lo, off), min(hi, end)
            where = pos + s - lo
            edge = t.kid_edge[i]
            if edge is not None:
                out.append(_Node(t, 0, 0, where, edge))
            else:
                klo = t.kid_lo[i] + s - off
                khi = t.kid_lo[i] + e - off
                if s == off and e == end:
                    out.append(_Node(t.kid_tree[i], klo, khi, where))
                else:
                    self._canon(t.kid_tree[i], klo, khi, where, out)
            i += 1

    def _children(self, u: _Node) -> list[_Node]:
        t, lo, hi = u.tree, u.lo, u.hi
        out = []
        offs = t.offsets
        i = bisect_right(offs, lo) - 1
        while i < len(t.kid_aggs) and offs[i] <= hi:
            off, end = offs[i], offs[i + 1] - 1
            s, e = max(lo, off), min(hi, end)
            where = u.pos + s - lo
            edge = t.kid_edge[i]
            if edge is not None:
                out.append(_Node(t, 0, 0, where, edge))
            else:
                out.append(_Node(t.kid_tree[i], t.kid_lo[i] + s - off, t.kid_lo[i] + e - off, where))
            i += 1
        return out

    def _meet(self, u: _Node, v: _Node) -> bool:
        if _disjoint(u.tree.box, v.tree.box):
            return False
        if u.edge is not None:
            if v.edge is not None:
                return u.edge == v.edge
            return self._find(v, u.edge) >= 0
        if v.edge is not None:
            return self._find(u, v.edge) >= 0
        k1 = (u.tree.uid, u.lo, u.hi)
        k2 = (v.tree.uid, v.lo, v.hi)
        hit = self.table.get(k1, k2)
        if hit is not None:
            return hit
        if (u.tree.level, u.hi - u.lo) < (v.tree.level, v.hi - v.lo):
            u, v = v, u
        res = False
        for c in self._children(u):
            if self._meet(c, v):
                res = True
                break
        self.table.put(k1, k2, res)
        return res

    def _find(self, u: _Node, e: Edge) -> int:
        """Offset of edge ``e`` inside node ``u``, or -1."""
        box = u.tree.box
        if not (_inside(self.pa[e[0]], box) and _inside(self.pb[e[1]], box)):
            return -1
        if u.edge is not None:
            return 0 if u.edge == e else -1
        key = (u.tree.uid, u.lo, u.hi, e)
        hit = self._find_memo.get(key)
        if hit is not None:
            return hit
        res = -1
        for c in self._children(u):
            r = self._find(c, e)
            if r >= 0:
                res = c.pos - u.pos + r
                break
        if len(self._find_memo) > 4_000_000:
            self._find_memo.clear()
        self._find_memo[key] = res
        return res

    def _meets_any(self, u: _Node, nodes: list[_Node]) -> bool:
        for v in nodes:
            if self._meet(u, v):
                return True
        return False

    # pathlet queries ------------------------------------------------------

    def intersects(self, p1: Pathlet, p2: Pathlet) -> bool:
        n1 = self.canonical(p1)
        if not n1:
            return False
        n2 = self.canonical(p2)
        for u in n1:
            if self._meets_any(u, n2):
                return True
        return False

    def locate(self, p: Pathlet, e: Edge) -> EdgeRef | None:
        for v in self.canonical(p):
            r = self._find(v, e)
            if r >= 0:
                return EdgeRef(p.tree, v.pos + r)
        return None

    def last_common_edge(
        self, p1: Pathlet, p2: Pathlet
    ) -> tuple[EdgeRef, EdgeRef, EdgeRef | None, EdgeRef | None]:
        """Last edge of ``p1`` that also lies in ``p2``, its copy in ``p2``, and their predecessors."""
        n2 = self.canonical(p2)
        for u in reversed(self.canonical(p1)):
            if not self._meets_any(u, n2):
                continue
            while u.edge is None:
                for c in reversed(self._children(u)):
                    if self._meets_any(c, n2):
                        u = c
                        break
                else:
                    raise AssertionError("intersection verdict without a witness leaf")
            e1 = EdgeRef(p1.tree, u.pos)
            e2 = self.locate(p2, u.edge)
            if e2 is None:
                raise AssertionError("witness edge missing from second pathlet")
            e3 = EdgeRef(p1.tree, e1.pos - 1) if e1.pos > p1.lo else None
            e4 = EdgeRef(p2.tree, e2.pos - 1) if e2.pos > p2.lo else None
            return e1, e2, e3, e4
        raise ValueError("pathlets do not intersect")


def exposed_pathlets(tree: MesTree) -> list[Pathlet]:
    """Slices of lower trees referenced directly by the root of ``tree``."""
    return [
        Pathlet(sub, lo, hi)
        for sub, lo, hi in zip(tree.kid_tree, tree.kid_lo, tree.kid_hi)
        if sub is not None
    ]


def update_intersection_tables(store: PathletStore, new_trees: Iterable[MesTree], peer_trees: Iterable[MesTree]) -> int:
    """Fill table entries between new exposed pathlets and those of overlapping peers.

    Returns the number of entries written.
    """
    peers = [(t, exposed_pathlets(t)) for t in peer_trees]
    written = 0
    for t in new_trees:
        for p1 in exposed_pathlets(t):
            u = _Node(p1.tree, p1.lo, p1.hi, p1.lo)
            for t2, ps in peers:
                if _disjoint(t.box, t2.box):
                    continue
                for p2 in ps:
                    if p2.tree.level != p1.tree.level:
                        continue
                    v = _Node(p2.tree, p2.lo, p2.hi, p2.lo)
                    value = store._meet(u, v)
                    store.table.put(p1.key, p2.key, value)
                    written += 1
    return written
