import json

import pytest

from pcap.cli import main


@pytest.fixture
def files(tmp_path):
    g = tmp_path / "g.txt"
    d = tmp_path / "d.txt"
    assert main(["gen", "path", "4", "-o", str(g)]) == 0
    d.write_text("1\n2\n3\n")
    return g, d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_random_with_domain(tmp_path, capsys):
    g, d = tmp_path / "r.txt", tmp_path / "rd.txt"
    code, _, _ = run(capsys, "gen", "random", 8, 0.5, 0.5, 2, 3, "-o", g, "--domain-out", d)
    assert code == 0 and g.exists() and d.read_text().strip()
    code, out, _ = run(capsys, "eig", "neumann", "-g", g, "-d", d, "-p", 2)
    assert code == 0 and json.loads(out)["method"] == "p2-exact"


def test_cap(files, capsys):
    g, d = files
    code, out, _ = run(capsys, "cap", "-g", g, "-d", d, "-A", "0", "-B", "4", "-p", 2.5)
    res = json.loads(out)
    assert code == 0 and res["value"] == pytest.approx(4 ** -1.5, rel=1e-9)
    assert res["potential"]["2"] == pytest.approx(0.5, abs=1e-8)


def test_isocap(files, capsys):
    g, d = files
    code, out, _ = run(capsys, "isocap", "S", "-g", g, "-d", d, "-p", 3)
    res = json.loads(out)
    assert code == 0 and res["value"] == pytest.approx(1 / 16) and res["exhaustive"]
    assert sorted([res["witness_a"], res["witness_b"]]) == [["0"], ["4"]]
    code, out, _ = run(capsys, "isocap", "closed", "-g", g, "-p", 2, "--heuristic")
    assert code == 0 and json.loads(out)["exhaustive"]  # below the cap: exact anyway


def test_isocap_above_cap(tmp_path, capsys):
    g, d = tmp_path / "g.txt", tmp_path / "d.txt"
    main(["gen", "path", "20", "-o", str(g)])
    d.write_text("\n".join(str(i) for i in range(1, 20)))
    code, _, err = run(capsys, "isocap", "D", "-g", g, "-d", d, "-p", 2)
    assert code == 2 and "heuristic" in err
    code, out, _ = run(capsys, "isocap", "D", "-g", g, "-d", d, "-p", 2, "--heuristic")
    res = json.loads(out)
    assert code == 0 and not res["exhaustive"] and res["value"] > 0


def test_eig(files, capsys):
    g, d = files
    code, out, _ = run(capsys, "eig", "steklov", "-g", g, "-d", d, "-p", 3, "--restarts", 4)
    res = json.loads(out)
    assert code == 0 and res["value"] == pytest.approx(0.25, rel=1e-6)
    assert res["residual"] <= 1e-6
    code, out, _ = run(capsys, "eig", "dirichlet", "-g", g, "-d", d, "-p", 2)
    assert json.loads(out)["value"] == pytest.approx(2 - 2 ** 0.5)


def test_coarea(files, capsys):
    g, d = files
    code, out, _ = run(capsys, "coarea", "-g", g, "-d", d, "-p", 2, "-a", 2, "--random-f", 5)
    res = json.loads(out)
    assert code == 0 and res["all_hold"] and len(res["checks"]) == 5


def test_verify(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": [2], "graphs": [{"family": "path", "params": [3]}]}))
    out = tmp_path / "r.jsonl"
    code, text, _ = run(capsys, "verify", "dirichlet", "-c", cfg, "-o", out)
    assert code == 0 and "0 failed" in text
    rows = out.read_text().splitlines()
    assert len(rows) == 1 + 2  # header, half and single domains (full is closed)


@pytest.mark.parametrize("argv", [
    ["cap", "-g", "{g}", "-d", "{d}", "-A", "0", "-B", "4", "-p", "0.5"],
    ["cap", "-g", "{missing}", "-A", "0", "-B", "4", "-p", "2"],
    ["isocap", "D", "-g", "{g}", "-p", "2"],
    ["gen", "hexagon", "3", "-o", "{out}"],
    ["verify", "all", "-c", "{missing}"],
])
def test_errors_exit_2(files, tmp_path, capsys, argv):
    g, d = files
    subs = dict(g=g, d=d, missing=tmp_path / "none.txt", out=tmp_path / "o.txt")
    code, out, err = run(capsys, *[a.format(**subs) for a in argv])
    assert code == 2 and err.startswith("pcap: error:") and out == ""
