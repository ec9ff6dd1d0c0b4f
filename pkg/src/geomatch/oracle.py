"""Exact and exhaustive references: Hungarian matching, alternating cycle and path enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .norms import pairwise

HUNGARIAN_CAP = 512
CYCLE_CAP = 10
PATH_CAP = 8

Step = tuple[int, int, bool]


@dataclass
class ExactResult:
    pairs: list[tuple[int, int]]
    cost: float
    u: np.ndarray
    v: np.ndarray

    def certificate_ok(self, costs: np.ndarray, rel_tol: float = 1e-6) -> bool:
        """Dual feasibility plus complementary slackness on the cost matrix."""
        tol = rel_tol * (1.0 + float(np.abs(costs).max(initial=0.0)))
        reduced = costs - self.u[:, None] - self.v[None, :]
        if reduced.size and reduced.min() < -tol:
            return False
        return all(abs(reduced[a, b]) <= tol for a, b in self.pairs)


def cost_matrix(points_a, points_b, norm: str = "l2") -> np.ndarray:
    pa = np.asarray(points_a, dtype=float)
    pb = np.asarray(points_b, dtype=float)
    if pa.size == 0:
        return np.zeros((0, 0))
    return pairwise(pa.reshape(len(pa), -1), pb.reshape(len(pb), -1), norm)


def hungarian(points_a, points_b, norm: str = "l2", cap: int = HUNGARIAN_CAP) -> ExactResult:
    """Minimum-cost perfect matching by successive shortest paths with potentials."""
    n = len(points_a)
    if len(points_b) != n:
        raise ValueError("A and B must have the same size")
    if n > cap:
        raise ValueError(f"instance size {n} exceeds the exact-solver cap {cap}")
    return hungarian_matrix(cost_matrix(points_a, points_b, norm))


def hungarian_matrix(costs: np.ndarray) -> ExactResult:
    n = costs.shape[0]
    if n == 0:
        return ExactResult([], 0.0, np.zeros(0), np.zeros(0))
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = costs
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=np.int64)  # owner[j]: row matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            cur = c[i0] - u[i0] - v
            free_cols = ~used
            free_cols[0] = False
            better = free_cols & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free_cols, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free_cols] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    pairs = sorted((int(owner[j]) - 1, j - 1) for j in range(1, n + 1))
    cost = math.fsum(float(costs[a, b]) for a, b in pairs)
    return ExactResult(pairs, cost, u[1:].copy(), v[1:].copy())


def brute_force_matching(costs: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Minimum over all n! permutations; for cross-checking tiny cases."""
    n = costs.shape[0]
    best = (math.inf, ())
    for perm in itertools.permutations(range(n)):
        total = math.fsum(float(costs[i, perm[i]]) for i in range(n))
        if total < best[0]:
            best = (total, perm)
    return best


# residual-graph structures -------------------------------------------------------


def adjusted_cost(steps: Sequence[Step], costs: np.ndarray, reg: float) -> float:
    """Net cost plus ``reg`` times length of an alternating sequence."""
    total = 0.0
    for a, b, matched in steps:
        w = float(costs[a, b])
        total += (reg - 1.0) * w if matched else (1.0 + reg) * w
    return total


def _mate_b(mate_a: Sequence[int], n: int) -> list[int]:
    mate_b = [-1] * n
    for a, b in enumerate(mate_a):
        if b >= 0:
            mate_b[b] = a
    return mate_b


def enumerate_alternating_cycles(costs: np.ndarray, mate_a: Sequence[int], reg: float,
                                 max_len: int | None = None, cap: int = CYCLE_CAP) -> list[tuple[list[Step], float]]:
    """Every simple alternating cycle, each listed once starting from its smallest A vertex.

    A cycle visits matched A vertices a0, a1, ..., taking the non-matching
    edge from a_k to the mate of a_{k+1} and then that matching edge.
    """
    matched = [a for a, b in enumerate(mate_a) if b >= 0]
    if max_len is None and len(matched) > cap:
        raise ValueError(f"{len(matched)} matched vertices exceed the enumeration cap {cap}")
    limit = len(matched) if max_len is None else min(len(matched), max_len // 2)
    out = []

    def walk(start, seq, used):
        if len(seq) >= 2:
            steps = _cycle_steps(seq, mate_a)
            out.append((steps, adjusted_cost(steps, costs, reg)))
        if len(seq) == limit:
            return
        for nxt in matched:
            if nxt > start and nxt not in used:
                used.add(nxt)
                seq.append(nxt)
                walk(start, seq, used)
                seq.pop()
                used.discard(nxt)

    for start in matched:
        walk(start, [start], {start})
    return out


def _cycle_steps(seq: Sequence[int], mate_a: Sequence[int]) -> list[Step]:
    steps = []
    k = len(seq)
    for i in range(k):
        a, nxt = seq[i], seq[(i + 1) % k]
        steps.append((a, mate_a[nxt], False))
        steps.append((nxt, mate_a[nxt], True))
    return steps


def enumerate_augmenting_paths(costs: np.ndarray, mate_a: Sequence[int], reg: float,
                               cap: int = PATH_CAP) -> tuple[list[tuple[list[Step], float]], float]:
    """Every simple augmenting path with its adjusted cost, and the minimum (inf if none)."""
    n = costs.shape[0]
    if n > cap:
        raise ValueError(f"instance size {n} exceeds the enumeration cap {cap}")
    mate_b = _mate_b(mate_a, n)
    free_a = [a for a in range(n) if mate_a[a] < 0]
    out = []

    def walk(a, steps, used_b):
        for b in range(n):
            if b in used_b or mate_a[a] == b:
                continue
            step = (a, b, False)
            if mate_b[b] < 0:
                full = steps + [step]
                out.append((full, adjusted_cost(full, costs, reg)))
            else:
                used_b.add(b)
                walk(mate_b[b], steps + [step, (mate_b[b], b, True)], used_b)
                used_b.discard(b)

    for a in free_a:
        walk(a, [], set())
    return out, min((c for _, c in out), default=math.inf)


# exact minima by subset dynamic programming ---------------------------------------


def _exchange(costs: np.ndarray, mate_a: Sequence[int], reg: float) -> tuple[list[int], np.ndarray]:
    """Matched A vertices and the cost of going a -> mate(w) -> w for each ordered pair."""
    matched = [a for a, b in enumerate(mate_a) if b >= 0]
    mates = [mate_a[a] for a in matched]
    k = len(matched)
    w = np.full((k, k), np.inf)
    for i, a in enumerate(matched):
        for j in range(k):
            if i != j:
                w[i, j] = (1.0 + reg) * costs[a, mates[j]] + (reg - 1.0) * costs[matched[j], mates[j]]
    return matched, w


def min_alternating_cycle(costs: np.ndarray, mate_a: Sequence[int], reg: float) -> float:
    """Exact minimum adjusted cost over simple alternating cycles (inf if there are none)."""
    matched, w = _exchange(costs, mate_a, reg)
    k = len(matched)
    if k > 16:
        raise ValueError("too many matched vertices for the subset program")
    best = math.inf
    for s in range(k):
        # subsets of vertices >= s that contain s, with s as the lowest vertex
        m = k - s
        dp = np.full((1 << m, m), np.inf)
        dp[1, 0] = 0.0
        sub = w[s:, s:]
        for mask in range(1, 1 << m, 2):
            row = dp[mask]
            if not np.isfinite(row).any():
                continue
            for v in np.flatnonzero(np.isfinite(row)).tolist():
                if v != 0 and mask != 1:
                    best = min(best, row[v] + sub[v, 0])
                nxt = row[v] + sub[v]
                for t in range(1, m):
                    if not mask >> t & 1:
                        nm = mask | (1 << t)
                        if nxt[t] < dp[nm, t]:
                            dp[nm, t] = nxt[t]
    return float(best)


def min_augmenting_path(costs: np.ndarray, mate_a: Sequence[int], reg: float) -> float:
    """Exact minimum adjusted cost over simple augmenting paths (inf if the matching is perfect)."""
    n = costs.shape[0]
    mate_b = _mate_b(mate_a, n)
    free_a = [a for a in range(n) if mate_a[a] < 0]
    free_b = [b for b in range(n) if mate_b[b] < 0]
    if not free_a:
        return math.inf
    matched, w = _exchange(costs, mate_a, reg)
    k = len(matched)
    if k > 16:
        raise ValueError("too many matched vertices for the subset program")
    fa, fb = np.array(free_a), np.array(free_b)
    best = float(((1.0 + reg) * costs[np.ix_(fa, fb)]).min())
    if k == 0:
        return best
    mates = np.array([mate_a[a] for a in matched])
    mpos = np.array(matched)
    enter = ((1.0 + reg) * costs[np.ix_(fa, mates)]).min(axis=0) + (reg - 1.0) * costs[mpos, mates]
    leave = ((1.0 + reg) * costs[np.ix_(mpos, fb)]).min(axis=1)
    dp = np.full((1 << k, k), np.inf)
    for v in range(k):
        dp[1 << v, v] = enter[v]
    for mask in range(1, 1 << k):
        row = dp[mask]
        for v in np.flatnonzero(np.isfinite(row)).tolist():
            best = min(best, float(row[v] + leave[v]))
            nxt = row[v] + w[v]
            for t in range(k):
                if not mask >> t & 1:
                    nm = mask | (1 << t)
                    if nxt[t] < dp[nm, t]:
                        dp[nm, t] = nxt[t]
    return best


def has_negative_cycle(costs: np.ndarray, mate_a: Sequence[int], reg: float, tol: float = 1e-9) -> bool:
    """Whether some alternating cycle has negative adjusted cost, by Floyd-Warshall on exchange costs.

    A negative closed walk splits into simple cycles, one of which is negative.
    """
    _, w = _exchange(costs, mate_a, reg)
    k = w.shape[0]
    dist = w.copy()
    for m in range(k):
        dist = np.minimum(dist, dist[:, m:m + 1] + dist[m:m + 1, :])
    scale = 1.0 + float(np.abs(costs).max(initial=0.0))
    return bool(k and (np.diag(dist) < -tol * scale).any())
