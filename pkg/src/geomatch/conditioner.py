"""Raw input to well-conditioned integer instances, and the outer guessing loop over scales."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hierarchy import ConstantsConfig, ceil_log2, cover_height, derive_params
from .matcher import BudgetExhausted, Matcher
from .norms import diameter_factor, distance_fn

# well-separation factor of the pair decomposition; stretch is (s + 4) / (s - 4)
SEPARATION = 16.0


@dataclass(frozen=True)
class RawInstance:
    d: int
    points_a: tuple[tuple[float, ...], ...]
    points_b: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if len(self.points_a) != len(self.points_b):
            raise ValueError("A and B must have the same size")
        for p in self.points_a + self.points_b:
            if len(p) != self.d:
                raise ValueError(f"point {p} does not have {self.d} coordinates")
            if not all(math.isfinite(x) for x in p):
                raise ValueError(f"non-finite coordinate in {p}")

    @classmethod
    def from_points(cls, points_a, points_b, d: int | None = None) -> "RawInstance":
        pa = tuple(tuple(float(x) for x in p) for p in points_a)
        pb = tuple(tuple(float(x) for x in p) for p in points_b)
        if d is None:
            d = len(pa[0]) if pa else 1
        return cls(d, pa, pb)

    @property
    def n(self) -> int:
        return len(self.points_a)

    def all_points(self) -> list[tuple[float, ...]]:
        return list(self.points_a) + list(self.points_b)


@dataclass
class ConditionedInstance:
    d: int
    n: int
    scale: float
    points_a: list[tuple[int, ...]]
    points_b: list[tuple[int, ...]]
    a_raw: list[int]
    b_raw: list[int]
    pre_matched: list[tuple[int, int]]


@dataclass(frozen=True)
class CoarseEstimate:
    w0: float


@dataclass
class SolveResult:
    pairs: list[tuple[int, int]]
    cost: float
    beta: float | None = None
    beta_index: int | None = None
    path_edges: int = 0
    cycle_edges: int = 0
    cycles_canceled: int = 0
    trace: list[str] = field(default_factory=list)
    attempts: list[dict] = field(default_factory=list)


# spanner -----------------------------------------------------------------


class _Node:
    __slots__ = ("ids", "lo", "hi", "left", "right", "center", "radius")

    def __init__(self, ids, lo, hi, norm):
        self.ids = ids
        self.lo = lo
        self.hi = hi
        self.left = self.right = None
        self.center = (lo + hi) / 2.0
        self.radius = _norm_of(hi - lo, norm) / 2.0


def _norm_of(v: np.ndarray, norm: str) -> float:
    v = np.abs(v)
    if norm == "l2":
        return float(np.sqrt((v * v).sum()))
    if norm == "l1":
        return float(v.sum())
    return float(v.max()) if v.size else 0.0


def _split_tree(pts: np.ndarray, norm: str) -> _Node:
    """Fair split tree: halve the bounding box along its longest side."""
    ids = np.arange(len(pts))
    root = _Node(ids, pts.min(axis=0), pts.max(axis=0), norm)
    stack = [root]
    while stack:
        node = stack.pop()
        ext = node.hi - node.lo
        if len(node.ids) == 1 or not ext.any():
            continue
        axis = int(np.argmax(ext))
        mid = (node.lo[axis] + node.hi[axis]) / 2.0
        sub = pts[node.ids]
        mask = sub[:, axis] <= mid
        kids = []
        for part in (node.ids[mask], node.ids[~mask]):
            q = pts[part]
            kids.append(_Node(part, q.min(axis=0), q.max(axis=0), norm))
        node.left, node.right = kids
        stack.extend(kids)
    return root


def build_spanner(inst: RawInstance, norm: str = "l2", separation: float = SEPARATION) -> list[tuple[int, int, float]]:
    """Sparse graph on A then B (indices 0..2n-1) whose paths stretch distances by at most 2.

    Built from a well-separated pair decomposition: one edge per pair between
    the smallest-index points of the two sets; points at the same location
    are chained with zero-weight edges.
    """
    pts = np.asarray(inst.all_points(), dtype=float).reshape(-1, inst.d)
    if len(pts) < 2:
        return []
    dist = distance_fn(norm)
    root = _split_tree(pts, norm)
    edges: set[tuple[int, int]] = set()
    rep = {}
    internal = []
    stack = [root]
    while stack:
        node = stack.pop()
        rep[id(node)] = int(node.ids.min())
        if node.left is None:
            ids = sorted(int(i) for i in node.ids)
            edges.update(zip(ids, ids[1:]))
        else:
            internal.append(node)
            stack.extend((node.left, node.right))
    for node in internal:
        pairs = [(node.left, node.right)]
        while pairs:
            u, v = pairs.pop()
            r = max(u.radius, v.radius)
            gap = _norm_of(u.center - v.center, norm) - 2.0 * r
            if gap >= separation * r:
                i, j = rep[id(u)], rep[id(v)]
                edges.add((min(i, j), max(i, j)))
            elif u.radius >= v.radius and u.left is not None:
                pairs.extend(((u.left, v), (u.right, v)))
            else:
                pairs.extend(((u, v.left), (u, v.right)))
    out = []
    for i, j in sorted(edges):
        out.append((i, j, float(dist(pts[i], pts[j]))))
    return out


# coarse estimate ---------------------------------------------------------------


def coarse_estimate(inst: RawInstance, norm: str = "l2") -> CoarseEstimate:
    """Weight of the last spanner edge Kruskal adds before every component is color-balanced."""
    n = inst.n
    if n == 0:
        return CoarseEstimate(0.0)
    size = 2 * n
    parent = list(range(size))
    balance = [1] * n + [-1] * n
    unbalanced = size

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, w in sorted(build_spanner(inst, norm), key=lambda e: (e[2], e[0], e[1])):
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        before = (balance[ri] != 0) + (balance[rj] != 0)
        parent[rj] = ri
        balance[ri] += balance[rj]
        unbalanced += (balance[ri] != 0) - before
        if unbalanced == 0:
            return CoarseEstimate(w)
    raise AssertionError("spanner is disconnected")


# conditioning --------------------------------------------------------------------


def scale_factor(d: int, n: int, eps: float, beta: float, norm: str = "l2") -> float:
    return 8.0 * diameter_factor(d, norm) * n / (eps * beta)


def _check_eps(eps: float) -> None:
    if not (isinstance(eps, (int, float)) and math.isfinite(eps) and 0 < eps <= 1):
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")


def condition(inst: RawInstance, eps: float, beta: float, norm: str = "l2") -> ConditionedInstance:
    """Scale, round half-up to the integer grid, and pre-match co-located A/B pairs."""
    _check_eps(eps)
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be positive, got {beta!r}")
    d, n = inst.d, inst.n
    sigma = scale_factor(d, n, eps, beta, norm)
    grid_a = [tuple(math.floor(x * sigma + 0.5) for x in p) for p in inst.points_a]
    grid_b = [tuple(math.floor(x * sigma + 0.5) for x in p) for p in inst.points_b]
    waiting: dict[tuple[int, ...], list[int]] = {}
    for j, q in enumerate(grid_b):
        waiting.setdefault(q, []).append(j)
    pre = []
    taken_a, taken_b = set(), set()
    for i, p in enumerate(grid_a):
        queue = waiting.get(p)
        if queue:
            j = queue.pop(0)
            pre.append((i, j))
            taken_a.add(i)
            taken_b.add(j)
    a_raw = [i for i in range(n) if i not in taken_a]
    b_raw = [j for j in range(n) if j not in taken_b]
    kept = [grid_a[i] for i in a_raw] + [grid_b[j] for j in b_raw]
    offset = tuple(min(p[k] for p in kept) for k in range(d)) if kept else (0,) * d
    shift = lambda p: tuple(x - o for x, o in zip(p, offset))
    return ConditionedInstance(
        d, len(a_raw), sigma,
        [shift(grid_a[i]) for i in a_raw], [shift(grid_b[j]) for j in b_raw],
        a_raw, b_raw, pre,
    )


# driver ----------------------------------------------------------------------------


def raw_cost(inst: RawInstance, pairs: Sequence[tuple[int, int]], norm: str = "l2") -> float:
    dist = distance_fn(norm)
    return math.fsum(dist(inst.points_a[a], inst.points_b[b]) for a, b in pairs)


def _exact_colocated(inst: RawInstance) -> list[tuple[int, int]]:
    waiting: dict[tuple, list[int]] = {}
    for j, q in enumerate(inst.points_b):
        waiting.setdefault(q, []).append(j)
    return [(i, waiting[p].pop(0)) for i, p in enumerate(inst.points_a)]


def match_conditioned(ci: ConditionedInstance, eps: float, config: ConstantsConfig, norm: str = "l2",
                      **matcher_kw) -> tuple[list[tuple[int, int]], Matcher | None]:
    """Run the matcher on a conditioned instance; pairs come back in raw indices."""
    pairs = list(ci.pre_matched)
    if ci.n == 0:
        return sorted(pairs), None
    h = cover_height(ci.points_a + ci.points_b, ci.d)
    params = derive_params(config, ci.d, ci.n, eps, norm, h)
    m = Matcher(ci.points_a, ci.points_b, params, config, **matcher_kw)
    m.run()
    pairs += [(ci.a_raw[a], ci.b_raw[b]) for a, b in m.matching.pairs()]
    return sorted(pairs), m


def beta_range(n: int) -> range:
    return range(-1, 2 * max(0, ceil_log2(n)) + 1)


def solve(inst: RawInstance, eps: float, config: ConstantsConfig | None = None, norm: str = "l2",
          trace: bool = False) -> SolveResult:
    """Cheapest perfect matching over all scale guesses, in raw indices and raw cost."""
    _check_eps(eps)
    config = config or ConstantsConfig.practical()
    n = inst.n
    if n == 0:
        return SolveResult([], 0.0)
    w0 = coarse_estimate(inst, norm).w0
    if w0 == 0.0:
        pairs = _exact_colocated(inst)
        return SolveResult(pairs, raw_cost(inst, pairs, norm))
    best: SolveResult | None = None
    attempts = []
    for i in beta_range(n):
        beta = math.ldexp(w0, i)
        ci = condition(inst, eps, beta, norm)
        try:
            pairs, m = match_conditioned(ci, eps, config, norm)
        except BudgetExhausted as exc:
            attempts.append({"beta_index": i, "beta": beta, "error": str(exc)})
            continue
        cost = raw_cost(inst, pairs, norm)
        stats = m.stats if m is not None else None
        attempts.append({"beta_index": i, "beta": beta, "cost": cost,
                         "path_edges": stats.path_edges if stats else 0,
                         "cycle_edges": stats.cycle_edges if stats else 0})
        if best is None or cost < best.cost:
            best = SolveResult(
                pairs, cost, beta, i,
                stats.path_edges if stats else 0, stats.cycle_edges if stats else 0,
                stats.cycles_canceled if stats else 0,
                list(stats.trace) if (stats and trace) else [],
            )
    if best is None:
        raise BudgetExhausted("no perfect matching found within budget for any scale guess")
    best.attempts = attempts
    return best
