"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from geomatch.conditioner import RawInstance, beta_range, coarse_estimate, condition
from geomatch.hierarchy import ConstantsConfig, cover_height, derive_params
from geomatch.matcher import Hooks, Matcher
from geomatch.oracle import cost_matrix, hungarian


def random_instance(seed: int, n: int, d: int = 2, dist: str = "uniform") -> RawInstance:
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        pts = rng.random((2 * n, d))
    elif dist == "clustered":
        k = max(1, math.isqrt(n))
        centers = rng.random((k, d))
        pts = centers[rng.integers(0, k, 2 * n)] + rng.normal(0, 0.02, (2 * n, d))
    else:
        pts = rng.integers(0, max(2, math.ceil(n ** (1 / d))), (2 * n, d)).astype(float)
    return RawInstance.from_points(pts[:n], pts[n:], d)


def bracket_beta(inst: RawInstance, norm: str = "l2") -> float | None:
    """A guess 2^i * w0 from the solve loop with OPT <= beta <= 2 OPT."""
    opt = hungarian(inst.points_a, inst.points_b, norm).cost
    w0 = coarse_estimate(inst, norm).w0
    if opt == 0:
        return None
    for i in beta_range(inst.n):
        beta = math.ldexp(w0, i)
        if opt <= beta <= 2 * opt:
            return beta
    return None


def make_matcher(points_a, points_b, eps: float, mode: str = "theory", norm: str = "l2",
                 hooks: Hooks | None = None, audit: list | None = None, **config_kw) -> Matcher:
    config = ConstantsConfig.for_mode(mode, **config_kw)
    d = len(points_a[0])
    h = cover_height(list(points_a) + list(points_b), d)
    params = derive_params(config, d, len(points_a), eps, norm, h)
    return Matcher(points_a, points_b, params, config, hooks=hooks, audit=audit)


def conditioned_matcher(inst: RawInstance, eps: float, mode: str = "theory", beta: float | None = None,
                        norm: str = "l2", hooks: Hooks | None = None, audit: list | None = None, **config_kw):
    """Conditioned instance at ``beta`` (default: the bracketing guess) and an unrun matcher on it."""
    if beta is None:
        beta = bracket_beta(inst, norm)
    ci = condition(inst, eps, beta, norm)
    if ci.n == 0:
        return ci, None
    return ci, make_matcher(ci.points_a, ci.points_b, eps, mode, norm, hooks, audit, **config_kw)


def conditioned_costs(m: Matcher) -> np.ndarray:
    return cost_matrix(m.hier.points_a, m.hier.points_b, m.params.norm)


def small_int_instance(rng: np.random.Generator, n: int, d: int = 2, side: int = 40):
    """Integer points with no A/B collision, as the matcher expects."""
    while True:
        a = rng.integers(0, side, (n, d))
        b = rng.integers(0, side, (n, d))
        if not set(map(tuple, a.tolist())) & set(map(tuple, b.tolist())):
            return [tuple(p) for p in a.tolist()], [tuple(p) for p in b.tolist()]


class Timeout(Exception):
    pass


class deadline:
    """Abort the enclosed block with ``Timeout`` after ``seconds`` of wall time (main thread only)."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        import signal

        def fire(signum, frame):
            raise Timeout(f"exceeded {self.seconds:.0f}s")

        self._old = signal.signal(signal.SIGALRM, fire)
        signal.setitimer(signal.ITIMER_REAL, self.seconds)
        return self

    def __exit__(self, *exc):
        import signal

        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, self._old)
        return False
