import csv
import io
import math

import numpy as np
import pytest

from geomatch.cli import format_instance, generate, main, parse_instance, parse_matching
from geomatch.conditioner import RawInstance


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "inst.txt"
    path.write_text(format_instance(generate(6, 2, "uniform", 3)))
    return path


def test_instance_text_round_trips():
    inst = generate(5, 3, "clustered", 1)
    assert parse_instance(format_instance(inst)) == inst


def test_match_then_verify(tmp_path, small, capsys):
    out = tmp_path / "m.txt"
    code, _, err = run(["match", "--input", small, "--eps", 0.5, "--mode", "theory", "--trace", "--out", out], capsys)
    assert code == 0
    assert err.count("round ") == 6
    claimed, pairs = parse_matching(out.read_text())
    assert len(pairs) == 6
    code, text, _ = run(["verify", "--input", small, "--matching", out, "--exact", "--eps", 0.5], capsys)
    assert code == 0
    ratio = float(text.split("ratio ")[1])
    assert 1.0 - 1e-12 <= ratio <= 1.5
    assert text.startswith(f"valid n 6 cost {claimed!r}")


def test_match_output_is_byte_identical(small, capsys):
    first = run(["match", "--input", small], capsys)
    second = run(["match", "--input", small], capsys)
    assert first == second and first[0] == 0


def test_match_exit_codes(tmp_path, small, capsys):
    assert run(["match", "--input", small, "--eps", 2], capsys)[0] == 3
    assert run(["match", "--input", small, "--eps", 0], capsys)[0] == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1\n0 0\n1 x\n")
    code, _, err = run(["match", "--input", bad], capsys)
    assert code == 2 and "line 3" in err
    short = tmp_path / "short.txt"
    short.write_text("1 2\n0\n1\n2\n")
    assert run(["match", "--input", short], capsys)[0] == 2


def test_verify_rejects_bad_matchings(tmp_path, capsys):
    inst = tmp_path / "i.txt"
    inst.write_text(format_instance(RawInstance.from_points([(0.0,), (2.0,)], [(1.0,), (3.0,)])))
    cases = {
        "cost 2.0\n0 0\n1 1\n": 0,
        "cost 2.0\n0 0\n1 0\n": 5,
        "cost 2.0\n0 0\n": 5,
        "cost 2.0\n0 0\n1 7\n": 5,
        "cost 9.0\n0 0\n1 1\n": 5,
        "cost 4.0\n0 1\n1 0\n": 0,
    }
    for text, want in cases.items():
        m = tmp_path / "m.txt"
        m.write_text(text)
        assert run(["verify", "--input", inst, "--matching", m], capsys)[0] == want, text
    m.write_text("cost 4.0\n0 1\n1 0\n")
    code, out, _ = run(["verify", "--input", inst, "--matching", m, "--exact", "--eps", 0.5], capsys)
    assert code == 6 and "ratio 2.0" in out


def test_gen_is_deterministic(tmp_path, capsys):
    a = run(["gen", "--n", 20, "--d", 3, "--seed", 9], capsys)
    b = run(["gen", "--n", 20, "--d", 3, "--seed", 9], capsys)
    c = run(["gen", "--n", 20, "--d", 3, "--seed", 10], capsys)
    assert a == b and a[1] != c[1]
    assert run(["gen", "--n", 0], capsys)[0] == 2


def test_grid_points_are_integral(capsys):
    _, out, _ = run(["gen", "--n", 50, "--dist", "grid", "--seed", 2], capsys)
    inst = parse_instance(out)
    pts = np.array(inst.all_points())
    assert np.array_equal(pts, np.round(pts))
    assert len({tuple(p) for p in pts}) < len(pts)


def median_gap(pts):
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    return float(np.median(d.min(axis=1)))


def test_clustered_statistics(capsys):
    _, out, _ = run(["gen", "--n", 400, "--dist", "clustered", "--seed", 5], capsys)
    pts = np.array(parse_instance(out).all_points())
    uniform = np.array(generate(400, 2, "uniform", 5).all_points())
    # 20 clusters of ~40 points with spread 0.02 pack far tighter than 800 uniform points
    assert median_gap(pts) < 0.5 * median_gap(uniform)
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 0.2)
    assert np.all(pts.std(axis=0) > 0.1)


def test_bench_single_row(capsys):
    code, out, _ = run(["bench", "--sizes", 4, "--trials", 1, "--eps", 0.5], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["n", "d", "eps", "trial", "time_ms", "cost", "ratio", "total_path_edges", "total_cycle_edges"]
    assert len(rows) == 1
    row = rows[0]
    assert row["n"] == "4" and float(row["ratio"]) >= 1.0 - 1e-12
    assert int(row["total_path_edges"]) >= 4 and math.isfinite(float(row["cost"]))
    assert run(["bench", "--sizes", "x"], capsys)[0] == 2
