"""Shifted-grid tree cover: levels of overlapping cells, subcells and clusters."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .norms import diameter_factor, distance_fn

A, B = 0, 1

IntPoint = tuple[int, ...]


@dataclass(frozen=True)
class ConstantsConfig:
    """Constant family and run options.

    ``c2`` and ``c4`` may be left as ``None``; they are then derived from the
    diameter factor of the norm (``kappa``, which is sqrt(d) for l2):
    ``c4 = 2*kappa*c0`` and, in theory mode, ``c2 = 128*kappa``.
    """

    c0: float = 1.0
    c1: float = 1.0
    c2: float | None = 1.0
    c3: float = 1.0
    c4: float | None = None
    c5: float = 1.0
    mode: str = "practical"
    c_budget: float = 64.0
    cancel_budget: float = 16.0
    eager_tables: bool = False
    checks: bool = False

    @classmethod
    def theory(cls, **overrides) -> "ConstantsConfig":
        base = dict(c0=1.0, c1=8.0, c2=None, c3=1.0, c4=None, c5=64.0, mode="theory")
        base.update(overrides)
        return cls(**base)

    @classmethod
    def practical(cls, **overrides) -> "ConstantsConfig":
        base = dict(c0=1.0, c1=1.0, c2=1.0, c3=1.0, c4=None, c5=1.0, mode="practical")
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> "ConstantsConfig":
        if mode == "theory":
            return cls.theory(**overrides)
        if mode == "practical":
            return cls.practical(**overrides)
        raise ValueError(f"unknown mode {mode!r}")

    def resolved(self, kappa: float) -> tuple[float, float, float, float, float, float]:
        c4 = self.c4 if self.c4 is not None else 2.0 * kappa * self.c0
        if self.c2 is not None:
            c2 = self.c2
        else:
            c2 = 128.0 * kappa if self.mode == "theory" else 1.0
        return self.c0, self.c1, c2, self.c3, c4, self.c5

    def validate(self, kappa: float) -> None:
        """Check the constraints the correctness argument relies on (theory mode only)."""
        c0, c1, c2, c3, c4, c5 = self.resolved(kappa)
        if min(c0, c1, c2, c3, c4, c5) <= 0:
            raise ValueError("constants must be positive")
        if self.mode != "theory":
            return
        slack = 1e-12
        problems = []
        if c1 < 8 * c0 * (1 - slack):
            problems.append("c1 >= 8*c0")
        if c4 < 2 * c0 * kappa * (1 - slack):
            problems.append("c4 >= 2*c0*kappa")
        if c5 < 64 * (1 - slack):
            problems.append("c5 >= 64")
        if c0 < c3 * c4 * c5 / c2 * (1 - slack):
            problems.append("c0 >= c3*c4*c5/c2")
        if problems:
            raise ValueError("theory constants violate: " + ", ".join(problems))


@dataclass(frozen=True)
class Params:
    """Quantities derived from the constants for one conditioned instance."""

    d: int
    n: int
    eps: float
    norm: str
    kappa: float
    log_n: int
    eps_hi: float
    eps_lo: float
    lam: float
    tau: int
    h: int
    c0: float

    @property
    def reg(self) -> float:
        """Weight of the length term in the lower-epsilon adjusted cost."""
        return self.c0 * self.eps_lo

    @property
    def reg_hi(self) -> float:
        return self.c0 * self.eps_hi


def ceil_log2(x: float) -> int:
    """Smallest integer t with 2**t >= x (x > 0)."""
    t = math.ceil(math.log2(x))
    while 2.0**t < x:
        t += 1
    while t > -1074 and 2.0 ** (t - 1) >= x:
        t -= 1
    return t


def derive_params(config: ConstantsConfig, d: int, n: int, eps: float, norm: str, height: int) -> Params:
    kappa = diameter_factor(d, norm)
    config.validate(kappa)
    c0, c1, c2, c3, c4, _ = config.resolved(kappa)
    log_n = max(1, ceil_log2(max(n, 1)))
    if config.mode == "theory":
        # the lifting argument needs h <= c3 * log_n; grow the log factor instead of cutting h
        log_n = max(log_n, math.ceil(height / c3))
    eps_hi = eps / c1
    eps_lo = eps_hi / (c2 * log_n)
    lam = c4 * eps_lo
    tau = max(2, ceil_log2(4.0 * kappa / lam))
    return Params(d, n, eps, norm, kappa, log_n, eps_hi, eps_lo, lam, tau, height, c0)


@dataclass(frozen=True, order=True)
class CellId:
    """A cell of the tree cover: ``level``, shift bits and grid index.

    The cell is the half-open box ``[anchor, anchor + 2**level)`` with
    ``anchor = shift * 2**(level-1) + index * 2**level`` per coordinate.
    """

    level: int
    shift: tuple[int, ...]
    index: tuple[int, ...]

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def anchor(self) -> tuple:
        i = self.level
        if i == 0:
            return tuple(k + b / 2 for b, k in zip(self.shift, self.index))
        half = 1 << (i - 1)
        return tuple(b * half + (k << i) for b, k in zip(self.shift, self.index))

    def contains(self, p: Sequence[int]) -> bool:
        side = self.side
        return all(a <= x < a + side for a, x in zip(self.anchor, p))


def cell_of(p: Sequence[int], level: int, shift: Sequence[int]) -> CellId:
    if level == 0:
        return CellId(0, tuple(shift), tuple(x - b for x, b in zip(p, shift)))
    half = 1 << (level - 1)
    return CellId(level, tuple(shift), tuple((x - b * half) >> level for x, b in zip(p, shift)))


def boxes_disjoint(c1: CellId, c2: CellId) -> bool:
    s1, s2 = c1.side, c2.side
    for a1, a2 in zip(c1.anchor, c2.anchor):
        if a1 + s1 <= a2 or a2 + s2 <= a1:
            return True
    return False


@dataclass
class Cluster:
    """Points of one color inside one subcell of a cell."""

    cell: CellId
    subcell: IntPoint
    color: int
    members: tuple[int, ...]
    center: tuple[float, ...]
    free: list[int] = field(default_factory=list)

    @property
    def saturated(self) -> bool:
        return not self.free


class Cell:
    """A nonempty cell with its cluster decomposition."""

    __slots__ = ("id", "a_ids", "b_ids", "clusters", "n_a", "lookup", "children", "child_maps", "blocks", "centers")

    def __init__(self, cid: CellId, a_ids: list[int], b_ids: list[int]):
        self.id = cid
        self.a_ids = a_ids
        self.b_ids = b_ids
        self.clusters: list[Cluster] = []
        self.n_a = 0
        self.lookup: dict[tuple[int, IntPoint], int] = {}
        self.children: list[CellId] = []
        self.child_maps: dict[CellId, np.ndarray] = {}
        self.blocks: np.ndarray | None = None
        self.centers: np.ndarray | None = None

    @property
    def level(self) -> int:
        return self.id.level

    @property
    def bichromatic(self) -> bool:
        return bool(self.a_ids) and bool(self.b_ids)

    def __repr__(self) -> str:
        return f"Cell({self.id}, |A|={len(self.a_ids)}, |B|={len(self.b_ids)})"


def cover_height(points: Sequence[IntPoint], d: int) -> int:
    """Smallest level >= 1 at which one cell of some shift contains every point."""
    arr = np.asarray(points, dtype=np.int64).reshape(-1, d)
    lo, hi = arr.min(axis=0), arr.max(axis=0)
    level = 1
    while True:
        half = 1 << (level - 1)
        ok = True
        for j in range(d):
            if not any((int(lo[j]) - b * half) >> level == (int(hi[j]) - b * half) >> level for b in (0, 1)):
                ok = False
                break
        if ok:
            return level
        level += 1


class Hierarchy:
    """All nonempty cells of levels 1..h with their clusters."""

    def __init__(self, points_a: Sequence[IntPoint], points_b: Sequence[IntPoint], params: Params):
        self.params = params
        self.d = params.d
        self.points_a = [tuple(int(x) for x in p) for p in points_a]
        self.points_b = [tuple(int(x) for x in p) for p in points_b]
        self.h = params.h
        self.dist = distance_fn(params.norm)
        self.shifts = list(itertools.product((0, 1), repeat=self.d))
        self.levels: list[dict[CellId, Cell]] = [dict() for _ in range(self.h + 1)]
        self._build()

    # construction -------------------------------------------------------

    def subcell_of(self, p: Sequence[int], level: int) -> IntPoint:
        j = level - self.params.tau
        if j <= 0:
            return tuple(p)
        return tuple(x >> j for x in p)

    def subcell_center(self, key: IntPoint, level: int) -> tuple[float, ...]:
        j = level - self.params.tau
        if j <= 0:
            return tuple(float(x) for x in key)
        half = float(1 << (j - 1))
        return tuple(float(k << j) + half for k in key)

    def _build(self) -> None:
        d = self.d
        na = len(self.points_a)
        coords = np.asarray(self.points_a + self.points_b, dtype=np.int64).reshape(-1, d)
        for level in range(1, self.h + 1):
            half = 1 << (level - 1)
            table = self.levels[level]
            for shift in self.shifts:
                idx = (coords - np.asarray(shift, dtype=np.int64) * half) >> level
                groups: dict[tuple, tuple[list[int], list[int]]] = {}
                for pid, row in enumerate(map(tuple, idx.tolist())):
                    g = groups.get(row)
                    if g is None:
                        g = groups[row] = ([], [])
                    if pid < na:
                        g[0].append(pid)
                    else:
                        g[1].append(pid - na)
                for row, (a_ids, b_ids) in groups.items():
                    cid = CellId(level, shift, row)
                    table[cid] = Cell(cid, a_ids, b_ids)
        for level in range(1, self.h + 1):
            for cell in self.levels[level].values():
                if cell.bichromatic:
                    self._build_clusters(cell)
        for level in range(2, self.h + 1):
            for cell in self.levels[level].values():
                if cell.bichromatic:
                    self._link_children(cell)

    def _build_clusters(self, cell: Cell) -> None:
        level = cell.level
        groups: dict[tuple[int, IntPoint], list[int]] = {}
        for color, ids, pts in ((A, cell.a_ids, self.points_a), (B, cell.b_ids, self.points_b)):
            for pid in ids:
                groups.setdefault((color, self.subcell_of(pts[pid], level)), []).append(pid)
        keys = sorted(groups)
        cell.clusters = [
            Cluster(cell.id, key[1], key[0], tuple(sorted(groups[key])), self.subcell_center(key[1], level))
            for key in keys
        ]
        cell.n_a = sum(1 for key in keys if key[0] == A)
        cell.lookup = {key: i for i, key in enumerate(keys)}
        cell.centers = np.array([c.center for c in cell.clusters], dtype=float).reshape(-1, self.d)
        anchor = np.asarray(cell.id.anchor, dtype=np.int64)
        reps = np.array([self.point(c.color, c.members[0]) for c in cell.clusters], dtype=np.int64).reshape(-1, self.d)
        if level == 1:
            cell.blocks = 2 * (reps - anchor)
        else:
            cell.blocks = (reps - anchor) >> (level - 2)

    def _link_children(self, cell: Cell) -> None:
        level = cell.level
        q = 1 << (level - 2)
        anchor = cell.id.anchor
        below = self.levels[level - 1]
        for combo in itertools.product((0, 1, 2), repeat=self.d):
            corner = [a + t * q for a, t in zip(anchor, combo)]
            shift = tuple((c >> (level - 2)) & 1 for c in corner)
            index = tuple((c - b * q) >> (level - 1) for c, b in zip(corner, shift))
            cid = CellId(level - 1, shift, index)
            child = below.get(cid)
            if child is None or not child.bichromatic:
                continue
            cell.children.append(cid)
            mapping = np.empty(len(child.clusters), dtype=np.int64)
            for k, cl in enumerate(child.clusters):
                key = (cl.color, self.subcell_of(self.point(cl.color, cl.members[0]), level))
                mapping[k] = cell.lookup[key]
            cell.child_maps[cid] = mapping
        cell.children.sort()

    # queries ------------------------------------------------------------

    def point(self, color: int, pid: int) -> IntPoint:
        return self.points_a[pid] if color == A else self.points_b[pid]

    def cell(self, cid: CellId) -> Cell | None:
        if 1 <= cid.level <= self.h:
            return self.levels[cid.level].get(cid)
        return None

    def cells(self, level: int) -> list[Cell]:
        return [self.levels[level][k] for k in sorted(self.levels[level])]

    def cells_containing(self, p: Sequence[int]) -> Iterable[CellId]:
        for level in range(1, self.h + 1):
            for shift in self.shifts:
                yield cell_of(p, level, shift)

    def children(self, cid: CellId) -> list[CellId]:
        cell = self.cell(cid)
        return list(cell.children) if cell is not None else []

    def smallest_common_cell(self, p: Sequence[int], q: Sequence[int]) -> CellId:
        return smallest_common_cell(p, q, self.d)

    def affected_cells(self, vertices: Iterable[tuple[int, int]]) -> set[CellId]:
        """Cells of levels 1..h holding at least one of the ``(color, id)`` vertices."""
        out: set[CellId] = set()
        for color, pid in vertices:
            out.update(self.cells_containing(self.point(color, pid)))
        return out


def smallest_common_cell(p: Sequence[int], q: Sequence[int], d: int) -> CellId:
    """Minimum-level cell holding both points; ties by (shift, anchor)."""
    shifts = list(itertools.product((0, 1), repeat=d))
    level = 0
    while True:
        best = None
        for shift in shifts:
            c = cell_of(p, level, shift)
            if c == cell_of(q, level, shift):
                if best is None or (c.shift, c.anchor) < (best.shift, best.anchor):
                    best = c
        if best is not None:
            return best
        level += 1


def build_hierarchy(points_a: Sequence[IntPoint], points_b: Sequence[IntPoint], params: Params) -> Hierarchy:
    return Hierarchy(points_a, points_b, params)
