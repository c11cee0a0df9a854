import json
import re

import numpy as np
import pytest

from snn_search.cli import create_parser, format_hits, main, validate_args
from snn_search.io_persist import save_binary
from snn_search.jinja import fmt_num
from snn_search.query import QueryResult
from snn_search.theory_model import BlobModel, model_row


def masked(text: str) -> list[str]:
    """Drop timing lines and timing columns from a report."""
    return [line.split(" | ")[0] for line in text.splitlines() if not line.startswith("time:")]


def write_csv(path, points) -> None:
    path.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in points))


@pytest.fixture
def d3_snni(files, tmp_path, capsys):
    path = tmp_path / "d3.snni"
    assert main(["build", "--input", str(files / "d3.csv"), "--output", str(path)]) == 0
    capsys.readouterr()
    return path


@pytest.fixture
def two_grids(tmp_path):
    """Two 5x5 grids with spacing 0.1, far apart, and their labels."""
    xs, ys = np.meshgrid(np.arange(5) * 0.1, np.arange(5) * 0.1)
    grid = np.column_stack([xs.ravel(), ys.ravel()])
    data = tmp_path / "grids.csv"
    write_csv(data, np.vstack([grid, grid + 10.0]))
    labels = tmp_path / "classes.txt"
    labels.write_text("0\n" * 25 + "1\n" * 25)
    return data, labels


def test_build(files, tmp_path, capsys):
    out = tmp_path / "d3.snni"
    assert main(["build", "--input", str(files / "d3.csv"), "--output", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == f"# snn-search build: {out}"
    assert lines[1:4] == ["n: 3", "d: 2", "metric: euclidean"]
    assert lines[4] == "sigma1: 7.071067812"
    assert lines[5].startswith("sigma2: ")
    assert lines[6].startswith("time: build ")
    assert out.read_bytes()[:4] == b"SNNI"


def test_build_header_file(files, tmp_path, capsys):
    plain, header = tmp_path / "plain.snni", tmp_path / "header.snni"
    main(["build", "--input", str(files / "d3.csv"), "--output", str(plain)])
    main(["build", "--input", str(files / "d3_header.csv"), "--header", "--output", str(header)])
    assert plain.read_bytes() == header.read_bytes()


def test_query(files, d3_snni, capsys):
    argv = ["query", "--index", str(d3_snni), "--queries", str(files / "d3_queries.csv"), "--radius", "5"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert masked(out) == [
        "0: 0:5.0 1:0.0 2:5.0",
        "1: 0:0.0 1:5.0",
        "queries: 2",
        "radius: 5 (euclidean)",
        "mean hits: 2.5",
        "mean candidate fraction: 0.833333",
    ]
    assert out.splitlines()[-1].startswith("time: mean query ")


def test_query_is_reproducible(files, d3_snni, capsys):
    argv = ["query", "--index", str(d3_snni), "--queries", str(files / "d3_queries.csv"), "--radius", "4.9"]
    main(argv)
    first = masked(capsys.readouterr().out)
    main([*argv, "--workers", "2", "--chunk-size", "1"])
    assert masked(capsys.readouterr().out) == first
    assert first[:2] == ["0: 1:0.0", "1: 0:0.0"]


def test_query_output_file(files, d3_snni, tmp_path, capsys):
    hits = tmp_path / "out" / "hits.txt"
    argv = ["query", "--index", str(d3_snni), "--queries", str(files / "d3_queries.csv")]
    assert main([*argv, "--radius", "0", "--output", str(hits)]) == 0
    assert hits.read_text() == "0: 1:0.0\n1: 0:0.0\n"
    assert capsys.readouterr().out.startswith("queries: 2\n")


def test_query_empty_binary_file(d3_snni, tmp_path, capsys):
    queries = tmp_path / "none.snnb"
    save_binary(np.empty((0, 2)), queries)
    argv = ["query", "--index", str(d3_snni), "--queries", str(queries)]
    assert main([*argv, "--format", "binary", "--radius", "1"]) == 0
    out = capsys.readouterr().out
    assert masked(out) == [
        "queries: 0",
        "radius: 1 (euclidean)",
        "mean hits: -",
        "mean candidate fraction: -",
    ]
    assert out.splitlines()[-1] == "time: mean query -"


def test_query_manhattan_chunked(tmp_path, capsys):
    data, queries, index = tmp_path / "p.csv", tmp_path / "q.csv", tmp_path / "p.snni"
    write_csv(data, [[0.0, 0.0], [1.0, 1.0], [0.5, 0.0], [3.0, 0.0]])
    write_csv(queries, [[0.0, 0.0], [1.0, 0.5], [3.0, 0.5]])
    assert main(["build", "--input", str(data), "--output", str(index)]) == 0
    capsys.readouterr()
    argv = ["query", "--index", str(index), "--queries", str(queries)]
    argv += ["--metric", "manhattan", "--radius", "1.25"]
    assert main(argv) == 0
    first = masked(capsys.readouterr().out)
    assert first[:3] == ["0: 0:0.0 2:0.5", "1: 1:0.5 2:1.0", "2: 3:0.5"]
    assert main([*argv, "--workers", "2", "--chunk-size", "1"]) == 0
    assert masked(capsys.readouterr().out) == first


def test_query_angular(tmp_path, capsys):
    data, queries, index = tmp_path / "circle.csv", tmp_path / "q.csv", tmp_path / "circle.snni"
    write_csv(data, [[2.0, 0.0], [0.0, 3.0], [-1.0, 0.0]])
    write_csv(queries, [[1.0, 0.0]])
    build = ["build", "--input", str(data), "--metric", "angular", "--normalize", "--output", str(index)]
    assert main(build) == 0
    capsys.readouterr()
    argv = ["query", "--index", str(index), "--queries", str(queries), "--metric", "angular", "--radius", "0.6pi"]
    assert main(argv) == 0
    first = capsys.readouterr().out.splitlines()[0]
    assert re.fullmatch(r"0: 0:\S+ 1:\S+", first)
    angle = float(first.split()[-1].split(":")[1])
    assert angle == pytest.approx(np.pi / 2)


def test_query_non_unit_rows(tmp_path, capsys):
    data, index = tmp_path / "circle.csv", tmp_path / "circle.snni"
    write_csv(data, [[1.0, 0.0], [0.0, 1.0]])
    assert main(["build", "--input", str(data), "--metric", "cosine", "--output", str(index)]) == 0
    queries = tmp_path / "q.csv"
    write_csv(queries, [[2.0, 0.0]])
    argv = ["query", "--index", str(index), "--queries", str(queries), "--metric", "cosine", "--radius", "0.5"]
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_bench(capsys):
    argv = ["bench", "--synthetic", "uniform", "--n", "300", "--d", "2", "--seed", "1", "--radii", "0,2", "--self-query"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# snn-search bench: uniform n=300 d=2 seed=1 self-query"
    assert lines[2].split(" | ")[0].split() == ["0", "0.0000%", "0.3333%"]
    assert lines[3].split(" | ")[0].split() == ["2", "100.0000%", "100.0000%"]
    assert len(lines) == 4


def test_bench_is_deterministic(capsys):
    argv = ["bench", "--synthetic", "blob", "--s", "0.3", "--n", "500", "--d", "3", "--radii", "0.1,0.2", "--n-queries", "50"]
    main(argv)
    first = masked(capsys.readouterr().out)
    main(argv)
    assert masked(capsys.readouterr().out) == first
    assert first[0] == "# snn-search bench: blob n=500 d=3 s=0.3 seed=0 queries=50"


def test_bench_json(capsys):
    argv = ["bench", "--n", "100", "--d", "2", "--radii", "0.1,pi/10", "--n-queries", "20", "--bruteforce", "--json"]
    assert main(argv) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [row["radius"] for row in rows] == [0.1, pytest.approx(np.pi / 10)]
    assert all(row["queries"] == 20 and row["bruteforce_time_s"] is not None for row in rows)
    assert rows[0]["return_ratio"] <= rows[1]["return_ratio"]


def test_dbscan(two_grids, capsys):
    data, labels = two_grids
    argv = ["dbscan", "--input", str(data), "--eps", "0.15", "--min-samples", "3", "--labels", str(labels)]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[:50] == ["0"] * 25 + ["1"] * 25
    assert masked("\n".join(lines[50:])) == [
        "# snn-search dbscan: eps=0.15 min_samples=3 backend=snn",
        "n: 50",
        "clusters: 2",
        "noise: 0",
        "nmi: 1",
    ]


def test_dbscan_backends_agree(two_grids, tmp_path, capsys):
    data, _ = two_grids
    outputs = []
    for backend in ("snn", "bruteforce"):
        out = tmp_path / f"{backend}.txt"
        argv = ["dbscan", "--input", str(data), "--eps", "0.11", "--backend", backend, "--output", str(out)]
        assert main(argv) == 0
        outputs.append(out.read_text())
    assert outputs[0] == outputs[1]
    assert "clusters: 2" in capsys.readouterr().out


def test_dbscan_all_noise(two_grids, capsys):
    data, _ = two_grids
    assert main(["dbscan", "--input", str(data), "--eps", "0.05"]) == 0
    out = capsys.readouterr().out
    assert "clusters: 0\nnoise: 50\n" in out
    assert "nmi" not in out


def test_dbscan_standardize(two_grids, capsys):
    data, _ = two_grids
    assert main(["dbscan", "--input", str(data), "--eps", "0.05", "--standardize"]) == 0
    assert "clusters: 2\nnoise: 0\n" in capsys.readouterr().out


def test_model(capsys):
    assert main(["model", "--c", "0", "--R", "1", "--s", "0.5", "--d", "5"]) == 0
    row = model_row(BlobModel(c=0.0, radius=1.0, s=0.5, d=5))
    assert capsys.readouterr().out.splitlines() == [
        "c=0 R=1 s=0.5 d=5",
        f"p1: {fmt_num(row.p1, 10)}",
        f"p2: {fmt_num(row.p2, 10)}",
        f"ratio: {fmt_num(row.ratio, 10)}",
    ]


def test_model_json_with_limit(capsys):
    assert main(["model", "--R", "0.5,1,2", "--s", "0.2", "--d", "10", "--limit-eps", "0.001", "--json"]) == 0
    *rows, limit = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [row["radius"] for row in rows] == [0.5, 1.0, 2.0]
    ratios = [row["ratio"] for row in rows]
    assert ratios == sorted(ratios)
    assert set(limit) == {"eps", "r1", "r2", "t"}
    assert limit["r1"] > 1


def test_model_limit_line(capsys):
    assert main(["model", "--R", "1", "--s", "0.5", "--d", "5", "--limit-eps", "0.01"]) == 0
    assert capsys.readouterr().out.splitlines()[-1].startswith("limit radius (eps=0.01): R1=")


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "snn-search 0.1.0"


@pytest.mark.parametrize(
    "argv",
    (
        [],
        ["frobnicate"],
        ["bench", "--n", "10", "--d", "2", "--radii", "abc"],
        ["bench", "--n", "10", "--d", "2", "--radii", "-1"],
        ["bench", "--n", "0", "--d", "2", "--radii", "0.1"],
        ["bench", "--n", "10", "--d", "2", "--radii", "0.1", "--workers", "0"],
        ["model", "--R", "1", "--s", "2", "--d", "5"],
        ["model", "--R", "1", "--s", "0.5", "--d", "5", "--limit-eps", "1.5"],
    ),
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_query_usage_errors(files, d3_snni, capsys):
    argv = ["query", "--index", str(d3_snni), "--queries", str(files / "d3_queries.csv")]
    assert main([*argv, "--radius", "1", "--metric", "mips"]) == 1
    assert main([*argv, "--radius", "3", "--metric", "cosine"]) == 1
    assert main([*argv, "--radius", "1", "--chunk-size", "0"]) == 1
    assert "mips" in capsys.readouterr().err


def test_data_errors(files, d3_snni, tmp_path, capsys):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    wide = tmp_path / "wide.csv"
    wide.write_text("1,2,3\n")
    out = str(tmp_path / "x.snni")
    assert main(["build", "--input", str(tmp_path / "missing.csv"), "--output", out]) == 2
    assert main(["build", "--input", str(ragged), "--output", out]) == 2
    assert main(["build", "--input", str(files / "d3.csv"), "--format", "binary", "--output", out]) == 2
    query = ["query", "--queries", str(wide), "--radius", "1"]
    assert main([*query, "--index", str(d3_snni)]) == 2
    assert main([*query, "--index", str(files / "d3.csv")]) == 2
    err = capsys.readouterr().err
    assert "ragged row 2" in err
    assert "bad magic" in err
    assert "dimension mismatch" in err


def test_validate_args(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    args = create_parser().parse_args(["bench", "--n", "1", "--d", "1", "--radii", "1"])
    assert validate_args(args) == (True, "")
    args = create_parser().parse_args(
        ["query", "--index", "i", "--queries", "q", "--radius", "1", "--output", str(blocker / "hits.txt")]
    )
    ok, message = validate_args(args)
    assert not ok
    assert "not a directory" in message


def test_format_hits():
    res = QueryResult(np.array([2, 7]), np.array([0.1, 1 / 3]), 5)
    assert format_hits(4, res) == "4: 2:0.1 7:0.3333333333333333"
    assert format_hits(0, QueryResult(np.empty(0, dtype=np.int64), np.empty(0))) == "0:"


def test_query_index_points_below_spacing(files, d3_snni, capsys):
    argv = ["query", "--index", str(d3_snni), "--queries", str(files / "d3.csv"), "--radius", "1"]
    assert main(argv) == 0
    assert masked(capsys.readouterr().out)[:3] == ["0: 0:0.0", "1: 1:0.0", "2: 2:0.0"]
