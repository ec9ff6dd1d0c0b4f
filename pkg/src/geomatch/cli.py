"""Command-line front end: match, verify, gen, bench."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence, TextIO

import numpy as np

from .conditioner import RawInstance, raw_cost, solve
from .hierarchy import ConstantsConfig
from .matcher import BudgetExhausted
from .norms import NORMS
from .oracle import HUNGARIAN_CAP, hungarian

EXIT_OK, EXIT_PARSE, EXIT_EPS, EXIT_BUDGET, EXIT_INVALID, EXIT_RATIO = 0, 2, 3, 4, 5, 6

COST_REL_TOL = 1e-9


class ParseError(ValueError):
    pass


# file formats -----------------------------------------------------------------


def _numbers(line: str, lineno: int, count: int, kind=float) -> list:
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"line {lineno}: expected {count} values, got {len(parts)}")
    try:
        vals = [kind(x) for x in parts]
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    if kind is float and not all(math.isfinite(v) for v in vals):
        raise ParseError(f"line {lineno}: non-finite coordinate")
    return vals


def _content_lines(text: str) -> list[tuple[int, str]]:
    return [(k + 1, line) for k, line in enumerate(text.splitlines()) if line.strip()]


def parse_instance(text: str) -> RawInstance:
    lines = _content_lines(text)
    if not lines:
        raise ParseError("line 1: empty instance file")
    lineno, head = lines[0]
    d, n = _numbers(head, lineno, 2, int)
    if d < 1 or n < 0:
        raise ParseError(f"line {lineno}: need d >= 1 and n >= 0")
    body = lines[1:]
    if len(body) != 2 * n:
        where = body[2 * n][0] if len(body) > 2 * n else (body[-1][0] + 1 if body else lineno + 1)
        raise ParseError(f"line {where}: expected {2 * n} coordinate lines, found {len(body)}")
    pts = [tuple(_numbers(line, k, d)) for k, line in body]
    return RawInstance(d, tuple(pts[:n]), tuple(pts[n:]))


def format_instance(inst: RawInstance) -> str:
    out = [f"{inst.d} {inst.n}"]
    out += [" ".join(repr(float(x)) for x in p) for p in inst.points_a + inst.points_b]
    return "\n".join(out) + "\n"


def parse_matching(text: str) -> tuple[float, list[tuple[int, int]]]:
    lines = _content_lines(text)
    if not lines:
        raise ParseError("line 1: empty matching file")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "cost":
        raise ParseError(f"line {lineno}: expected 'cost <value>'")
    try:
        cost = float(parts[1])
    except ValueError:
        raise ParseError(f"line {lineno}: bad cost {parts[1]!r}") from None
    pairs = [tuple(_numbers(line, k, 2, int)) for k, line in lines[1:]]
    return cost, pairs


def format_matching(cost: float, pairs: Sequence[tuple[int, int]]) -> str:
    return "".join([f"cost {cost!r}\n"] + [f"{a} {b}\n" for a, b in pairs])


def check_matching(inst: RawInstance, pairs: Sequence[tuple[int, int]]) -> str | None:
    """Problem description, or None if ``pairs`` is a perfect matching of ``inst``."""
    n = inst.n
    if len(pairs) != n:
        return f"expected {n} pairs, got {len(pairs)}"
    seen_a, seen_b = set(), set()
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            return f"index out of range in pair {a} {b}"
        if a in seen_a:
            return f"duplicated a_index {a}"
        if b in seen_b:
            return f"duplicated b_index {b}"
        seen_a.add(a)
        seen_b.add(b)
    return None


# generator ---------------------------------------------------------------------


def generate(n: int, d: int, dist: str, seed: int) -> RawInstance:
    """Seeded instance from numpy's Philox counter-based generator."""
    rng = np.random.Generator(np.random.Philox(seed))
    if dist == "uniform":
        pts = rng.random((2 * n, d))
    elif dist == "clustered":
        k = max(1, math.isqrt(n))
        centers = rng.random((k, d))
        which = rng.integers(0, k, size=2 * n)
        pts = centers[which] + rng.normal(0.0, 0.02, size=(2 * n, d))
    elif dist == "grid":
        side = max(2, math.ceil(n ** (1.0 / d)))
        pts = rng.integers(0, side, size=(2 * n, d)).astype(float)
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    rows = [tuple(float(x) for x in p) for p in pts]
    return RawInstance(d, tuple(rows[:n]), tuple(rows[n:]))


# commands ----------------------------------------------------------------------


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _eps_ok(eps: float) -> bool:
    return math.isfinite(eps) and 0 < eps <= 1


def cmd_match(args, err: TextIO) -> int:
    if not _eps_ok(args.eps):
        print(f"error: eps must lie in (0, 1], got {args.eps}", file=err)
        return EXIT_EPS
    try:
        inst = parse_instance(_read(args.input))
    except (ParseError, ValueError) as exc:
        print(f"error: {args.input}: {exc}", file=err)
        return EXIT_PARSE
    try:
        result = solve(inst, args.eps, ConstantsConfig.for_mode(args.mode), args.norm, trace=args.trace)
    except BudgetExhausted as exc:
        print(f"error: step budget exhausted: {exc}", file=err)
        return EXIT_BUDGET
    if args.trace:
        for line in result.trace:
            print(line, file=err)
    _write(args.out, format_matching(result.cost, result.pairs))
    return EXIT_OK


def cmd_verify(args, err: TextIO) -> int:
    try:
        inst = parse_instance(_read(args.input))
    except (ParseError, ValueError) as exc:
        print(f"error: {args.input}: {exc}", file=err)
        return EXIT_PARSE
    try:
        claimed, pairs = parse_matching(_read(args.matching))
    except ParseError as exc:
        print(f"error: {args.matching}: {exc}", file=err)
        return EXIT_INVALID
    problem = check_matching(inst, pairs)
    if problem is not None:
        print(f"invalid matching: {problem}", file=err)
        return EXIT_INVALID
    cost = raw_cost(inst, pairs, args.norm)
    if abs(cost - claimed) > COST_REL_TOL * max(1.0, abs(cost)):
        print(f"invalid matching: claimed cost {claimed!r} but pairs cost {cost!r}", file=err)
        return EXIT_INVALID
    print(f"valid n {inst.n} cost {cost!r}")
    if args.exact:
        if inst.n > HUNGARIAN_CAP:
            print(f"error: exact check limited to n <= {HUNGARIAN_CAP}", file=err)
            return EXIT_PARSE
        opt = hungarian(inst.points_a, inst.points_b, args.norm).cost
        ratio = cost / opt if opt > 0 else (1.0 if cost <= 0 else math.inf)
        print(f"optimum {opt!r} ratio {ratio!r}")
        if args.eps is not None and ratio > 1.0 + args.eps + 1e-12:
            print(f"ratio {ratio!r} exceeds 1+eps = {1.0 + args.eps!r}", file=err)
            return EXIT_RATIO
    return EXIT_OK


def cmd_gen(args, err: TextIO) -> int:
    if args.n < 1 or args.d < 1:
        print("error: need n >= 1 and d >= 1", file=err)
        return EXIT_PARSE
    _write(args.out, format_instance(generate(args.n, args.d, args.dist, args.seed)))
    return EXIT_OK


BENCH_FIELDS = ["n", "d", "eps", "trial", "time_ms", "cost", "ratio", "total_path_edges", "total_cycle_edges"]


def bench_row(n: int, d: int, eps: float, trial: int, seed: int, dist: str, mode: str, norm: str) -> dict:
    inst = generate(n, d, dist, seed + trial)
    start = time.perf_counter()
    result = solve(inst, eps, ConstantsConfig.for_mode(mode), norm)
    elapsed = (time.perf_counter() - start) * 1000.0
    ratio = ""
    if n <= HUNGARIAN_CAP:
        opt = hungarian(inst.points_a, inst.points_b, norm).cost
        ratio = repr(result.cost / opt) if opt > 0 else repr(1.0)
    return {
        "n": n, "d": d, "eps": repr(eps), "trial": trial, "time_ms": f"{elapsed:.3f}",
        "cost": repr(result.cost), "ratio": ratio,
        "total_path_edges": result.path_edges, "total_cycle_edges": result.cycle_edges,
    }


def _threads() -> int:
    raw = os.environ.get("GEOMATCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_bench(args, err: TextIO) -> int:
    try:
        sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    except ValueError:
        print(f"error: bad --sizes {args.sizes!r}", file=err)
        return EXIT_PARSE
    if not sizes or min(sizes) < 1 or args.trials < 1:
        print("error: need positive sizes and trials", file=err)
        return EXIT_PARSE
    if not _eps_ok(args.eps):
        print(f"error: eps must lie in (0, 1], got {args.eps}", file=err)
        return EXIT_EPS
    jobs = [(n, args.d, args.eps, t, args.seed, args.dist, args.mode, args.norm) for n in sizes for t in range(args.trials)]
    workers = _threads()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(bench_row, *zip(*jobs)))
    else:
        rows = [bench_row(*job) for job in jobs]
    out = sys.stdout if args.csv in (None, "-") else open(args.csv, "w", newline="")
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geomatch", description="Approximate geometric bipartite matching.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="compute a near-optimal perfect matching")
    m.add_argument("--input", required=True)
    m.add_argument("--eps", type=float, default=0.25)
    m.add_argument("--norm", choices=NORMS, default="l2")
    m.add_argument("--mode", choices=("theory", "practical"), default="practical")
    m.add_argument("--trace", action="store_true", help="print per-round trace lines to stderr")
    m.add_argument("--out")
    m.set_defaults(func=cmd_match)

    v = sub.add_parser("verify", help="check a matching file against an instance")
    v.add_argument("--input", required=True)
    v.add_argument("--matching", required=True)
    v.add_argument("--exact", action="store_true", help="also compare against the exact optimum")
    v.add_argument("--eps", type=float)
    v.add_argument("--norm", choices=NORMS, default="l2")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a seeded random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--dist", choices=("uniform", "clustered", "grid"), default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="time solves over a range of sizes")
    b.add_argument("--sizes", required=True, help="comma-separated list of n")
    b.add_argument("--eps", type=float, default=0.25)
    b.add_argument("--trials", type=int, default=1)
    b.add_argument("--csv")
    b.add_argument("--d", type=int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--dist", choices=("uniform", "clustered", "grid"), default="uniform")
    b.add_argument("--mode", choices=("theory", "practical"), default="practical")
    b.add_argument("--norm", choices=NORMS, default="l2")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args, sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
