import csv
import io
import json
from math import ceil, log

import pytest

from rpcover.cli import BENCH_HEADER, main
from rpcover.graph import read_graph


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


@pytest.fixture
def cycle(tmp_path):
    path = tmp_path / "c3.txt"
    path.write_text("graph 3 3 directed\n0 0 1 1\n1 1 2 1\n2 0 2 1\n")
    return path


@pytest.fixture
def det_forest(tmp_path, cycle):
    out = tmp_path / "c3.rpc"
    code, text = run("build", "--graph", cycle, "--f", 1, "--L", 2, "--mode", "det", "--out", out)
    assert code == 0 and "pairs " in text and "trees_used " in text
    return out


def test_gen_single_edge(tmp_path):
    code, _ = run("gen", "--n", 2, "--m", 1, "--seed", 0, "--out", tmp_path / "g.txt")
    assert code == 0 and read_graph(tmp_path / "g.txt").m == 1


def test_gen_is_deterministic(tmp_path):
    for name in "ab":
        run("gen", "--n", 12, "--m", 20, "--seed", 1, "--out", tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    g = read_graph(tmp_path / "a")
    assert len({(e.tail, e.head) for e in g.edges}) == 20


def test_gen_infeasible(tmp_path):
    code, _ = run("gen", "--n", 3, "--m", 7, "--seed", 0, "--out", tmp_path / "g")
    assert code == 2


def test_gen_prints_derived_seed(tmp_path):
    code, text = run("gen", "--n", 4, "--m", 3, "--out", tmp_path / "g")
    assert code == 0 and text.startswith("seed ")


def test_det_closed_loop(cycle, det_forest):
    code, text = run("verify", "--graph", cycle, "--forest", det_forest, "--exhaustive")
    assert code == 0 and " 0 violations" in text


def test_query_lists_k_leaves(cycle, det_forest):
    _, built = run("build", "--graph", cycle, "--f", 1, "--L", 2, "--mode", "det",
                   "--out", det_forest)
    K = int(built.split(" K ")[1].split()[0])
    code, text = run("query", "--graph", cycle, "--forest", det_forest, "--fail", "")
    assert code == 0 and text.splitlines()[0] == f"selected {K}"


def test_query_estimate(cycle, det_forest):
    code, text = run("query", "--graph", cycle, "--forest", det_forest, "--fail", "2",
                     "--s", 0, "--t", 2)
    assert code == 0 and text.splitlines()[-1] == "estimate 2"


def test_query_too_many_failures(cycle, det_forest):
    code, _ = run("query", "--graph", cycle, "--forest", det_forest, "--fail", "0,1")
    assert code == 2
    code, _ = run("query", "--graph", cycle, "--forest", det_forest, "--fail", "7")
    assert code == 2


def test_rand_precondition(cycle, tmp_path, capsys):
    code, _ = run("build", "--graph", cycle, "--f", 2, "--L", 4, "--mode", "rand-improved",
                  "--seed", 1, "--out", tmp_path / "r")
    assert code == 2
    assert "2f^2 <= L" in capsys.readouterr().err


def test_flat_family_size(tmp_path):
    g = tmp_path / "g.txt"
    run("gen", "--n", 10, "--m", 20, "--seed", 3, "--out", g)
    code, text = run("build", "--graph", g, "--f", 2, "--L", 3, "--mode", "flat-baseline",
                     "--seed", 0, "--out", tmp_path / "fl")
    assert code == 0
    assert f"covering_value {ceil(2 * 3 ** 2 * log(10))}" in text


def test_budget_exceeded(tmp_path, capsys):
    g = tmp_path / "g.txt"
    run("gen", "--n", 10, "--m", 20, "--seed", 3, "--out", g)
    code, _ = run("build", "--graph", g, "--f", 2, "--L", 3, "--mode", "det", "--budget", 10,
                  "--out", tmp_path / "x")
    assert code == 3
    assert "21100" in capsys.readouterr().err


def test_verify_stub_family_fails(tmp_path, cycle):
    forest = tmp_path / "stub.rpc"
    run("build", "--graph", cycle, "--f", 1, "--L", 2, "--mode", "flat-baseline", "--c", 0.001,
        "--seed", 0, "--out", forest)
    code, text = run("verify", "--graph", cycle, "--forest", forest, "--exhaustive")
    assert code == 1 and "violation F=" in text


def test_verify_statistical_rand(tmp_path):
    g = tmp_path / "g.txt"
    run("gen", "--n", 8, "--m", 16, "--seed", 2, "--out", g)
    forest = tmp_path / "r.rpc"
    code, text = run("build", "--graph", g, "--f", 1, "--L", 4, "--mode", "rand-improved",
                     "--seed", 5, "--out", forest)
    assert code == 0 and "seed 5" in text
    code, text = run("verify", "--graph", g, "--forest", forest, "--samples", 300, "--seed", 1)
    assert code == 0 and " 0 violations" in text


def test_gadget_and_certify(tmp_path):
    gd = tmp_path / "gd"
    code, text = run("gadget", "--L", 4, "--f", 3, "--out", gd)
    assert code == 0 and "leaves=8" in text
    code, text = run("gadget", "--L", 2, "--f", 1, "--out", gd)
    forest = tmp_path / "gd.rpc"
    code, _ = run("build", "--graph", gd / "graph.txt", "--allow-zero", "--f", 1, "--L", 3,
                  "--mode", "det", "--out", forest)
    assert code == 0
    code, text = run("certify", "--gadget", gd, "--forest", forest)
    assert code == 0 and "certificate PASS" in text
    code, _ = run("certify", "--gadget", gd, "--forest", forest, "--cutoff", 4)
    assert code == 2


def test_bench_csv(tmp_path):
    cfg = tmp_path / "bench.json"
    graph = {"n": 10, "m": 20, "seed": 4}
    cfg.write_text(json.dumps({"runs": [
        {"graph": graph, "mode": "det", "f": 1, "L": 3, "verify": "exhaustive", "queries": 20},
        {"graph": graph, "mode": "flat-baseline", "f": 1, "L": 3, "verify": "none",
         "queries": 20, "repetitions": 1},
    ]}))
    out = tmp_path / "bench.csv"
    code, _ = run("bench", "--config", cfg, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == BENCH_HEADER and len(rows) == 2
    det = rows[0]
    assert det["violations"] == "0"
    assert int(det["trees_used"]) <= int(det["K_max"])
    assert int(det["covering_value"]) == int(det["K"]) * int(det["alpha"]) ** int(det["h"])
    assert int(det["max_selected"]) <= int(det["K"])
    assert rows[1]["pairs"] == "" and rows[1]["violations"] == ""
