"""Augmentation loop: repair cells bottom-up, pick the cheapest candidate, augment."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .compressed import Candidate, CompressedGraph, cycle_weight
from .hierarchy import A, B, CellId, ConstantsConfig, Hierarchy, Params
from .norms import distance_fn
from .pathlets import PathletStore, update_intersection_tables
from .simplify import ReducingCycle, is_reducing, simple_reducing_subcycle

log = logging.getLogger(__name__)

Step = tuple[int, int, bool]


class BudgetExhausted(RuntimeError):
    """The run used more edge steps or cancellations than its budget allows."""


class InternalInvariantError(RuntimeError):
    """A property the algorithm relies on did not hold."""


class Matching:
    """Partial matching between A (rows) and B (columns) as mate arrays."""

    def __init__(self, n_a: int, n_b: int | None = None):
        self.mate_a = [-1] * n_a
        self.mate_b = [-1] * (n_a if n_b is None else n_b)

    def __len__(self) -> int:
        return sum(1 for b in self.mate_a if b >= 0)

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b in enumerate(self.mate_a) if b >= 0]

    def cost(self, dist: Callable[[int, int], float]) -> float:
        return sum(dist(a, b) for a, b in self.pairs())

    def apply(self, steps: Sequence[Step]) -> None:
        """Symmetric difference with an alternating path or cycle."""
        for a, b, matched in steps:
            if matched:
                if self.mate_a[a] != b:
                    raise InternalInvariantError(f"edge ({a},{b}) is not in the matching")
                self.mate_a[a] = -1
                self.mate_b[b] = -1
        for a, b, matched in steps:
            if not matched:
                if self.mate_a[a] >= 0 or self.mate_b[b] >= 0:
                    raise InternalInvariantError(f"edge ({a},{b}) would break the matching")
                self.mate_a[a] = b
                self.mate_b[b] = a


class CandidateQueue:
    """Global min-heap of per-cell candidates with lazy invalidation."""

    def __init__(self):
        self._heap: list[tuple[float, CellId, int]] = []
        self._live: dict[CellId, tuple[int, Candidate]] = {}

    def put(self, cand: Candidate | None, cid: CellId, version: int) -> None:
        if cand is None:
            self._live.pop(cid, None)
            return
        self._live[cid] = (version, cand)
        heapq.heappush(self._heap, (cand.key, cid, version))

    def drop(self, cid: CellId) -> None:
        self._live.pop(cid, None)

    def best(self) -> Candidate | None:
        while self._heap:
            key, cid, version = self._heap[0]
            live = self._live.get(cid)
            if live is not None and live[0] == version:
                return live[1]
            heapq.heappop(self._heap)
        return None

    def __len__(self) -> int:
        return len(self._live)


@dataclass
class RunStats:
    rounds: int = 0
    path_edges: int = 0
    cycle_edges: int = 0
    cycles_canceled: int = 0
    repairs: int = 0
    trace: list[str] = field(default_factory=list)


@dataclass
class Hooks:
    """Optional callbacks used by audits; all receive the matcher first."""

    after_repair: Callable | None = None
    before_round: Callable | None = None
    on_path: Callable | None = None
    on_cycle: Callable | None = None


class Matcher:
    """Approximate min-cost perfect matching on a conditioned integer instance."""

    def __init__(self, points_a: Sequence[Sequence[int]], points_b: Sequence[Sequence[int]], params: Params,
                 config: ConstantsConfig | None = None, hooks: Hooks | None = None, audit: list | None = None):
        if len(points_a) != len(points_b):
            raise ValueError("A and B must have the same size")
        self.params = params
        self.config = config or ConstantsConfig.practical()
        self.hooks = hooks or Hooks()
        self.audit = audit
        self.hier = Hierarchy(points_a, points_b, params)
        self.dist = distance_fn(params.norm)
        self.store = PathletStore(self.hier.points_a, self.hier.points_b, self.dist, params.reg)
        n = len(points_a)
        self.n = n
        self.matching = Matching(n)
        self.graphs: dict[CellId, CompressedGraph] = {}
        for level in range(1, self.hier.h + 1):
            for cell in self.hier.cells(level):
                if cell.bichromatic:
                    self.graphs[cell.id] = CompressedGraph(cell, self.hier)
        self.queue = CandidateQueue()
        self.stats = RunStats()
        L = params.log_n
        eps2 = params.eps * params.eps
        self.step_budget = self.config.c_budget * max(n, 1) * L * L / eps2
        self.cancel_budget = self.config.cancel_budget * max(n, 1) * L * L / eps2

    # helpers ------------------------------------------------------------

    def edge_length(self, a: int, b: int) -> float:
        return self.store.length(a, b)

    def cost(self) -> float:
        return self.matching.cost(self.edge_length)

    def _check_length(self, steps: Sequence[Step]) -> None:
        # only meaningful when the scale guess brackets the optimum
        total = sum(self.store.length(a, b) for a, b, _ in steps)
        bound = 27.0 * self.params.kappa * self.n / self.params.eps
        if total > bound * (1 + 1e-9):
            raise InternalInvariantError(f"alternating structure of length {total!r} exceeds {bound!r}")

    def _charge(self, steps: int, cycle: bool) -> None:
        if cycle:
            self.stats.cycle_edges += steps
            self.stats.cycles_canceled += 1
            if self.stats.cycles_canceled > self.cancel_budget:
                raise BudgetExhausted(f"more than {self.cancel_budget:.0f} cycle cancellations")
        else:
            self.stats.path_edges += steps
        total = self.stats.path_edges + self.stats.cycle_edges
        if total > self.step_budget:
            raise BudgetExhausted(f"edge steps {total} exceed budget {self.step_budget:.0f}")

    # repair -------------------------------------------------------------

    def repair(self, cid: CellId) -> list[Step] | None:
        """Recompute one cell's compressed graph.

        Returns the steps of a simple reducing cycle when one is found; the
        cell is then left unstable.
        """
        g = self.graphs[cid]
        self.stats.repairs += 1
        g.version += 1
        g.stable = False
        self.queue.drop(cid)
        mate_a = self.matching.mate_a
        g.refresh_saturation(mate_a, self.matching.mate_b)
        g.reweigh(mate_a, self.graphs)
        table = g.solve_paths()
        if table.cycle is not None:
            pls = g.cycle_pathlets(table.cycle, self.store, self.graphs, mate_a)
            if not pls or not is_reducing(self.store, pls):
                raise InternalInvariantError(
                    f"negative compressed cycle in {cid} (weight {cycle_weight(g.weight, table.cycle)!r}) "
                    "does not expand to a reducing cycle"
                )
            return self.store.report(simple_reducing_subcycle(self.store, pls, self.audit), cycle=True)
        try:
            g.build_expansions(self.store, self.graphs, mate_a, self.audit)
        except ReducingCycle as found:
            return self.store.report(found.cycle, cycle=True)
        g.stable = True
        if self.config.eager_tables:
            self._fill_tables(g)
        self.queue.put(g.select_candidate(self.store), cid, g.version)
        if self.hooks.after_repair is not None:
            self.hooks.after_repair(self, g)
        return None

    def _fill_tables(self, g: CompressedGraph) -> None:
        mine = [e.tree for e in g.expansions.values() if e.xi]
        peers = [e.tree for h in self.graphs.values() if h.cell.id.level == g.cell.id.level and h.stable
                 for e in h.expansions.values() if e.xi]
        update_intersection_tables(self.store, mine, peers)

    def _repair_all(self, pending: set[CellId]) -> None:
        heap = sorted(pending)
        heapq.heapify(heap)
        queued = set(heap)
        while heap:
            cid = heapq.heappop(heap)
            queued.discard(cid)
            steps = self.repair(cid)
            if steps is None:
                continue
            if self.hooks.on_cycle is not None:
                self.hooks.on_cycle(self, steps)
            if self.config.checks:
                self._check_length(steps)
            self.matching.apply(steps)
            self._charge(len(steps), cycle=True)
            for c in self._affected(steps):
                if c not in queued:
                    queued.add(c)
                    heapq.heappush(heap, c)

    def _affected(self, steps: Sequence[Step]) -> set[CellId]:
        verts = set()
        for a, b, _ in steps:
            verts.add((A, a))
            verts.add((B, b))
        return {c for c in self.hier.affected_cells(verts) if c in self.graphs}

    # main loop ----------------------------------------------------------

    def initialize(self) -> None:
        self._repair_all(set(self.graphs))

    def find_path(self) -> tuple[list[Step], Candidate]:
        cand = self.queue.best()
        if cand is None:
            raise InternalInvariantError("no augmenting candidate while free vertices remain")
        steps = self.store.report(cand.pathlets, cand.tip_a, cand.tip_b)
        return steps, cand

    def augment(self, steps: Sequence[Step]) -> None:
        if self.config.checks:
            self._check_length(steps)
        self.matching.apply(steps)
        self._charge(len(steps), cycle=False)
        self._repair_all(self._affected(steps))

    def run(self) -> Matching:
        self.initialize()
        while len(self.matching) < self.n:
            if self.hooks.before_round is not None:
                self.hooks.before_round(self)
            steps, cand = self.find_path()
            if self.hooks.on_path is not None:
                self.hooks.on_path(self, steps, cand)
            before = self.stats.cycles_canceled
            self.augment(steps)
            self.stats.rounds += 1
            line = (f"round {self.stats.rounds} | path_edges {len(steps)} | "
                    f"cycles_canceled {self.stats.cycles_canceled - before} | cost {self.cost()!r}")
            self.stats.trace.append(line)
            log.debug(line)
        return self.matching


def run_matcher(points_a, points_b, params: Params, config: ConstantsConfig | None = None, **kw) -> Matcher:
    m = Matcher(points_a, points_b, params, config, **kw)
    m.run()
    return m
