"""Turning concatenated expansions into simple ones and extracting simple reducing cycles."""

from __future__ import annotations

import math
from typing import Sequence

from .pathlets import Pathlet, PathletStore

# relative slack below which a cycle's adjusted cost counts as non-negative
REDUCING_TOL = 1e-10


class ReducingCycle(Exception):
    """Raised when simplification meets a cycle of negative adjusted cost.

    ``cycle`` is a simple reducing cycle given as a pathlet sequence.
    """

    def __init__(self, cycle: list[Pathlet]):
        super().__init__("reducing cycle found")
        self.cycle = cycle


class Peel:
    """Audit record of one split of a cycle into two subcycles."""

    __slots__ = ("whole", "first", "second")

    def __init__(self, whole: float, first: float, second: float):
        self.whole = whole
        self.first = first
        self.second = second


def _nonempty(seq: Sequence[Pathlet]) -> list[Pathlet]:
    return [p for p in seq if p.lo <= p.hi]


def is_reducing(store: PathletStore, cycle: Sequence[Pathlet]) -> bool:
    cost, length = store.cost_and_length(_nonempty(cycle), cycle=True)
    return cost < -REDUCING_TOL * (1.0 + length)


def extend(store: PathletStore, xi: list[Pathlet], phi: Pathlet, audit: list | None = None) -> list[Pathlet]:
    """Append ``phi`` to the simple sequence ``xi``, cutting out the cycle it closes.

    Raises ``ReducingCycle`` if that cycle has negative adjusted cost.
    """
    if phi.lo > phi.hi:
        return xi
    for j, other in enumerate(xi):
        if not store.intersects(phi, other):
            continue
        e1, e2, _, _ = store.last_common_edge(phi, other)
        cyc = _nonempty(
            [Pathlet(other.tree, e2.pos, other.hi)] + xi[j + 1:] + [Pathlet(phi.tree, phi.lo, e1.pos - 1)]
        )
        if is_reducing(store, cyc):
            raise ReducingCycle(simple_reducing_subcycle(store, cyc, audit))
        return _nonempty(xi[:j] + [Pathlet(other.tree, other.lo, e2.pos - 1), Pathlet(phi.tree, e1.pos, phi.hi)])
    return xi + [phi]


def construct_expansion(store: PathletStore, pathlets: Sequence[Pathlet], audit: list | None = None) -> list[Pathlet]:
    """Greedy simplification of the concatenation of ``pathlets``.

    Returns a simple pathlet sequence (whose concatenation has no repeated
    matching edge), or raises ``ReducingCycle``.
    """
    xi: list[Pathlet] = []
    for phi in pathlets:
        xi = extend(store, xi, phi, audit)
    return xi


def _peel_check(store: PathletStore, whole, first, second, audit: list | None) -> None:
    if audit is None:
        return
    total = store.adj_cost(_nonempty(whole), cycle=True)
    a = store.adj_cost(_nonempty(first), cycle=True) if _nonempty(first) else 0.0
    b = store.adj_cost(_nonempty(second), cycle=True) if _nonempty(second) else 0.0
    audit.append(Peel(total, a, b))


def _step_bound(store: PathletStore, seq: list[Pathlet]) -> int:
    pairs = sum(
        1
        for i in range(len(seq))
        for j in range(i + 1, len(seq))
        if store.intersects(seq[i], seq[j])
    )
    longest = max(p.size for p in seq)
    return max(1, pairs) * (math.ceil(math.log2(max(longest, 1))) + 1)


def simple_reducing_subcycle(store: PathletStore, cycle: Sequence[Pathlet], audit: list | None = None) -> list[Pathlet]:
    """A simple cycle of negative adjusted cost inside the reducing cycle ``cycle``.

    When ``audit`` is a list, every split is recorded there and the step
    count is checked against its bound.
    """
    seq = _nonempty(cycle)
    if not is_reducing(store, seq):
        raise ValueError("cycle is not reducing")
    bound = _step_bound(store, seq) if audit is not None else None
    steps = 0
    while True:
        if len(seq) == 1:
            return seq
        if len(seq) == 2:
            out, used = _two_ended(store, seq, audit)
            steps += used
            break
        hit = None
        for i in range(1, len(seq)):
            phi = seq[i]
            for j in range(i - 1, -1, -1):
                if store.intersects(phi, seq[j]):
                    hit = (j, i)
                    break
            if hit is not None:
                break
        if hit is None:
            return seq
        j, i = hit
        e1, e2, _, _ = store.last_common_edge(seq[i], seq[j])
        phi, other = seq[i], seq[j]
        inner = [Pathlet(other.tree, e2.pos, other.hi)] + seq[j + 1:i] + [Pathlet(phi.tree, phi.lo, e1.pos - 1)]
        outer = seq[:j] + [Pathlet(other.tree, other.lo, e2.pos - 1), Pathlet(phi.tree, e1.pos, phi.hi)] + seq[i + 1:]
        _peel_check(store, seq, inner, outer, audit)
        inner, outer = _nonempty(inner), _nonempty(outer)
        if is_reducing(store, inner):
            if len(inner) == 1:
                out = inner
                break
            out, used = _two_ended(store, inner, audit)
            steps += used
            break
        seq = outer
        steps += 1
    if bound is not None and steps > bound:
        raise AssertionError(f"simplification took {steps} steps, bound {bound}")
    return out


def _two_ended(store: PathletStore, seq: list[Pathlet], audit: list | None) -> tuple[list[Pathlet], int]:
    """Prune-and-search for a cycle whose only overlapping pathlets are its first and last.

    Keeps a window ``[w, first.hi]`` of the first pathlet such that the part
    before ``w`` shares no edge with the last pathlet; each step halves the window.
    """
    first, last, mid = seq[0], seq[-1], list(seq[1:-1])
    w = first.lo
    steps = 0
    while True:
        if first.lo > first.hi:
            return _nonempty(mid + [last]), steps
        if last.lo > last.hi:
            return _nonempty([first] + mid), steps
        if w > first.hi or not store.intersects(Pathlet(first.tree, w, first.hi), last):
            return [first] + mid + [last], steps
        steps += 1
        k = first.hi - w + 1
        f = w + (k + 1) // 2 - 1
        if not store.intersects(Pathlet(first.tree, w, f), last):
            w = f + 1
            continue
        e1, e2, _, _ = store.last_common_edge(Pathlet(first.tree, first.lo, f), last)
        p1, p2 = e1.pos, e2.pos
        small = [Pathlet(first.tree, first.lo, p1 - 1), Pathlet(last.tree, p2, last.hi)]
        rest_first = Pathlet(first.tree, p1, first.hi)
        rest_last = Pathlet(last.tree, last.lo, p2 - 1)
        _peel_check(store, [first] + mid + [last], small, [rest_first] + mid + [rest_last], audit)
        small_ne = _nonempty(small)
        if is_reducing(store, small_ne):
            if len(small_ne) == 1:
                return small_ne, steps
            first, last = small_ne[0], small_ne[1]
            mid = []
        else:
            first, last = rest_first, rest_last
            w = f + 1
