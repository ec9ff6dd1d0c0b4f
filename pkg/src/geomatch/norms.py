"""Distance functions for the supported norms."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

NORMS = ("l2", "l1", "linf")

Point = Sequence[float]


def _l2(p: Point, q: Point) -> float:
    return math.dist(p, q)


def _l1(p: Point, q: Point) -> float:
    return float(sum(abs(x - y) for x, y in zip(p, q)))


def _linf(p: Point, q: Point) -> float:
    return float(max(abs(x - y) for x, y in zip(p, q)))


def distance_fn(norm: str) -> Callable[[Point, Point], float]:
    if norm == "l2":
        return _l2
    if norm == "l1":
        return _l1
    if norm == "linf":
        return _linf
    raise ValueError(f"unknown norm {norm!r}")


def pairwise(x: np.ndarray, y: np.ndarray, norm: str) -> np.ndarray:
    """Distance matrix between the rows of ``x`` and the rows of ``y``."""
    diff = np.abs(x[:, None, :] - y[None, :, :])
    if norm == "l2":
        return np.sqrt((diff * diff).sum(axis=-1))
    if norm == "l1":
        return diff.sum(axis=-1)
    if norm == "linf":
        return diff.max(axis=-1) if diff.shape[-1] else diff.sum(axis=-1)
    raise ValueError(f"unknown norm {norm!r}")


def diameter_factor(d: int, norm: str) -> float:
    """Norm of the all-ones vector: the diameter of a unit cube."""
    if norm == "l2":
        return math.sqrt(d)
    if norm == "l1":
        return float(d)
    if norm == "linf":
        return 1.0
    raise ValueError(f"unknown norm {norm!r}")
