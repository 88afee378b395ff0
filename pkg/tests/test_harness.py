import json
import math

import pytest

from pcap.errors import InvalidArgument, ParseError
from pcap.graph import build_domain, generate
from pcap.harness import (THEOREMS, BoundsReport, _report, default_config, load_config,
                          run_corpus, verify_dirichlet, verify_infinite, verify_neumann,
                          verify_steklov)

from conftest import path_domain

SMALL = {"p": [2.0, 3.0], "graphs": [{"family": "path", "params": [3]},
                                     {"family": "cycle", "params": [4], "domains": ["full"]}],
         "infinite": [{"family": "half-line", "radii": [2, 4]}]}


def test_report_pass_logic():
    assert _report("dirichlet", "x", 2, 1.0, 1.5, 2.0).passed
    # inside the tolerance band 1e-7 (1 + eigenvalue)
    assert _report("dirichlet", "x", 2, 1.0, 2.0 + 1e-7, 2.0).passed
    assert not _report("dirichlet", "x", 2, 1.0, 2.0 + 1e-6, 2.0).passed
    r = _report("dirichlet", "x", 2, 1.0, 0.5, 2.0)
    assert not r.passed and r.margin == pytest.approx(-1.0)
    assert r.secondary["bracket_ratio"] == 2.0
    keys = set(r.as_record())
    assert {"theorem", "graph_id", "p", "lower", "eigenvalue", "upper", "cheeger_lower",
            "cheeger_upper", "pass", "margin"} <= keys


def test_verify_dirichlet(path4):
    r = verify_dirichlet(path4, 2)
    assert r.passed and r.theorem in THEOREMS
    assert r.eigenvalue == pytest.approx(2 - math.sqrt(2))
    assert r.lower <= r.eigenvalue <= r.upper
    assert r.cheeger_lower <= r.eigenvalue <= r.cheeger_upper
    tight = verify_dirichlet(path_domain(2), 2)
    assert tight.upper == pytest.approx(2) and tight.eigenvalue == pytest.approx(2)
    assert tight.passed and abs(tight.margin) < 1e-9


def test_verify_neumann(k2):
    (r,) = verify_neumann(k2, 2)
    assert r.theorem == "closed-graph" and r.passed
    assert r.eigenvalue == pytest.approx(2) and r.upper == pytest.approx(2)
    (c,) = verify_neumann(generate("cycle", 4), 2)
    assert c.passed and c.eigenvalue == pytest.approx(2)
    g = generate("random", 7, 0.5, (0.5, 2), 1, (0.5, 2))
    d = build_domain(g, g.vertices[:4]) if g.is_connected(g.vertices[:4]) else \
        build_domain(g, g.vertices[:3])
    a, b = verify_neumann(d, 1.5)
    assert (a.theorem, b.theorem) == ("neumann", "neumann-bar")
    assert a.passed and b.passed and a.secondary["alpha_gap"] <= 1e-9


@pytest.mark.parametrize("n", [2, 4])
@pytest.mark.parametrize("p", [1.5, 3.0])
def test_verify_steklov_path(n, p):
    a, b = verify_steklov(path_domain(n), p)
    assert a.passed and b.passed
    assert a.eigenvalue == pytest.approx(a.upper, rel=1e-6)
    assert a.secondary["factor2_upper_holds"] is (p <= 2)


def test_steklov_factor2_counterexample(path4):
    a, _ = verify_steklov(path4, 3)
    assert a.eigenvalue == pytest.approx(0.25, rel=1e-8)
    assert a.secondary["factor2_upper"] == pytest.approx(0.125, rel=1e-9)
    assert not a.secondary["factor2_upper_holds"]


def test_verify_infinite():
    reps = verify_infinite("half-line", 2, [2, 4, 8])
    assert [r.secondary["radius"] for r in reps] == [2, 4, 8]
    assert all(r.passed and r.secondary["monotone"] for r in reps)
    vals = [r.eigenvalue for r in reps]
    assert vals == sorted(vals, reverse=True)


def test_load_config_defaults_and_errors(tmp_path, monkeypatch):
    monkeypatch.delenv("PCAP_SEED", raising=False)
    cfg = load_config({})
    assert cfg["p"] == default_config()["p"] and len(cfg["graphs"]) == 22
    with pytest.raises(ParseError, match="field p"):
        load_config({"p": [0.5]})
    with pytest.raises(ParseError, match="unknown keys"):
        load_config({"nope": 1})
    with pytest.raises(ParseError, match=r"graphs\[0\]"):
        load_config({"graphs": [{"family": "hexagon", "params": [3]}]})
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "p": [2,\n  }\n')
    with pytest.raises(ParseError) as err:
        load_config(str(bad))
    assert err.value.line == 3 and err.value.path == str(bad)
    with pytest.raises(ParseError):
        load_config(str(tmp_path / "missing.json"))
    monkeypatch.setenv("PCAP_SEED", "7")
    assert load_config({"seed": 3})["seed"] == 7
    monkeypatch.setenv("PCAP_SEED", "x")
    with pytest.raises(InvalidArgument):
        load_config({})


def test_empty_corpus(tmp_path):
    out = tmp_path / "r.jsonl"
    res = run_corpus({"graphs": []}, groups=("dirichlet", "neumann", "steklov"), output=str(out))
    assert res.exit_code == 0 and res.records == ()
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["tool"] == "pcap"


def test_run_corpus_small(tmp_path, monkeypatch):
    monkeypatch.delenv("PCAP_SEED", raising=False)
    out = tmp_path / "r.jsonl"
    res = run_corpus(SMALL, output=str(out))
    assert res.exit_code == 0 and res.records
    header, *rows = [json.loads(x) for x in out.read_text().splitlines()]
    assert header["seed"] == 42 and len(header["config_hash"]) == 64
    keys = [(r["graph_id"], r["theorem"], r["p"]) for r in rows]
    assert keys == sorted(keys)
    assert {r["theorem"] for r in rows} >= {"dirichlet", "neumann", "steklov", "closed-graph",
                                            "dirichlet-infinite"}
    first = out.read_bytes()
    run_corpus(SMALL, output=str(out))
    assert out.read_bytes() == first


def test_failing_record_sets_exit_code(tmp_path):
    # a tree(3) radius beyond the exhaustive cap becomes an error record
    res = run_corpus({"graphs": [], "p": [2.0],
                      "infinite": [{"family": "regular-tree(3)", "radii": [3]}]},
                     groups=("infinite",), output=str(tmp_path / "r.jsonl"))
    assert res.exit_code == 1
    (rec,) = res.records
    assert rec["pass"] is False and "SizeError" in rec["error"]


def test_report_dataclass_is_frozen():
    r = BoundsReport("dirichlet", "g", 2.0, 1.0, 1.5, 2.0)
    with pytest.raises(AttributeError):
        r.passed = True
