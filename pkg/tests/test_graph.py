import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcap.errors import DomainDisconnected, InvalidArgument, ParseError, ValidationError
from pcap.graph import (WeightedGraph, build_domain, edge_cut, generate, load_domain, load_graph,
                        rescale_measure, save_domain, save_graph, truncate, truncation_domain,
                        vertex_boundary, volume)


def ids(*xs):
    return frozenset(str(x) for x in xs)


def test_vertex_boundary_examples():
    assert vertex_boundary(generate("path", 4), ids(1, 2, 3)) == ids(0, 4)
    k4 = generate("complete", 4)
    assert vertex_boundary(k4, k4.vertices) == frozenset()
    grid = generate("grid", 3, 3)
    assert vertex_boundary(grid, ["1,1"]) == {"0,1", "1,0", "1,2", "2,1"}


def test_vertex_boundary_rejects_empty():
    with pytest.raises(InvalidArgument):
        vertex_boundary(generate("path", 2), [])


def test_build_domain_drops_boundary_edges():
    tri = generate("complete", 3)
    d = build_domain(tri, ["0"])
    assert set(d.boundary_graph.weights) == {("0", "1"), ("0", "2")}
    assert d.boundary_graph.weight("1", "2") == 0.0
    assert d.closure == ("0", "1", "2")

    p = build_domain(generate("path", 4), ids(1, 2, 3))
    assert set(p.boundary_graph.weights) == {("0", "1"), ("1", "2"), ("2", "3"), ("3", "4")}

    k4 = generate("complete", 4)
    d = build_domain(k4, k4.vertices)
    assert d.is_closed and d.boundary_graph == k4


def test_build_domain_disconnected():
    g = WeightedGraph({"a": 1, "b": 1, "c": 1, "d": 1}, {("a", "b"): 1, ("c", "d"): 1})
    with pytest.raises(DomainDisconnected):
        build_domain(g, ["a", "c"])


def test_volume_and_cut():
    g = generate("path", 4)
    assert volume(g, ids(0, 1, 2)) == 3
    assert volume(g, []) == 0
    heavy = g.with_measure({x: 2.0 for x in g.vertices})
    assert volume(heavy, ids(1, 2)) == 4
    assert edge_cut(g, ids(0, 1), ids(2, 3, 4)) == {("1", "2")}
    assert edge_cut(g, ids(0), ids(3)) == set()
    assert edge_cut(generate("complete", 3), ids(0), ids(1, 2)) == {("0", "1"), ("0", "2")}


def test_generators():
    p = generate("path", 4)
    assert p.vertices == tuple(str(i) for i in range(5))
    assert len(p.edges) == 4 and all(w == 1 for _, _, w in p.edges)
    assert all(m == 1 for m in p.measure.values())
    tri = generate("complete", 3)
    assert len(tri.edges) == 3
    a = generate("random", 8, 0.5, (0.5, 2), 7)
    assert a == generate("random", 8, 0.5, (0.5, 2), 7)
    assert a.is_connected()
    assert all(0.5 <= w <= 2 for _, _, w in a.edges)
    with pytest.raises(InvalidArgument):
        generate("hypercube", 3)
    with pytest.raises(InvalidArgument):
        generate("random", 5, 1.5)


def test_truncations():
    g, ex = truncate("integer-line", 3)
    assert set(g.vertices) == {str(i) for i in range(-3, 4)}
    assert ex[1] == {str(i) for i in range(-2, 3)}
    g, ex = truncate("regular-tree(3)", 2)
    assert len(g) == 1 + 3 + 6
    g, ex = truncate("half-line", 4)
    assert set(g.vertices) == ids(0, 1, 2, 3, 4)
    for fam in ("integer-line", "half-line", "lattice", "regular-tree(4)"):
        _, ex = truncate(fam, 3)
        assert all(a <= b for a, b in zip(ex.family, ex.family[1:]))
    d = truncation_domain("half-line", 3)
    assert d.omega == ids(0, 1, 2, 3) and d.boundary == ids(4)
    with pytest.raises(InvalidArgument):
        truncate("moebius", 2)


def test_rescale_measure():
    d = build_domain(generate("path", 4), ids(1, 2, 3))
    assert rescale_measure(d, 1).boundary_graph == d.boundary_graph
    d4 = rescale_measure(d, 4)
    assert d4.boundary_graph.m("2") == 0.25 and d4.boundary_graph.m("0") == 1.0
    assert volume(rescale_measure(d, 8), d.omega) == volume(d4, d.omega) / 2
    for x in d.boundary:
        assert d4.boundary_graph.m(x) == d.boundary_graph.m(x)
    with pytest.raises(InvalidArgument):
        rescale_measure(d, 0)


def test_file_roundtrip(tmp_path):
    g = generate("random", 9, 0.4, (0.5, 2), 3, (0.5, 2))
    save_graph(g, tmp_path / "g.txt")
    assert load_graph(tmp_path / "g.txt") == g
    save_domain(ids(1, 2), tmp_path / "d.txt")
    assert load_domain(tmp_path / "d.txt") == ids(1, 2)


@pytest.mark.parametrize("body, err", [
    ("pgraph v1\nv a 1\nv b 1\ne a b 0\n", ValidationError),
    ("pgraph v1\nv a 1\nv b 1\ne a b 1\ne b a 2\n", ValidationError),
    ("pgraph v1\nv a -1\n", ValidationError),
    ("pgraph v1\nv a one\n", ParseError),
    ("graph\nv a 1\n", ParseError),
    ("pgraph v1\nx a 1\n", ParseError),
])
def test_file_errors(tmp_path, body, err):
    f = tmp_path / "bad.txt"
    f.write_text(body)
    with pytest.raises(err):
        load_graph(f)


def test_parse_error_location(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("pgraph v1\n# comment\nv a 1\nv b x\n")
    with pytest.raises(ParseError) as info:
        load_graph(f)
    assert info.value.line == 4 and info.value.field == 3


@given(st.integers(2, 9), st.floats(0.2, 1.0), st.integers(0, 10_000), st.data())
def test_domain_invariants(n, prob, seed, data):
    g = generate("random", n, prob, (0.5, 2), seed)
    omega = data.draw(st.sets(st.sampled_from(g.vertices), min_size=1))
    try:
        d = build_domain(g, omega)
    except DomainDisconnected:
        return
    assert not (d.boundary & d.omega)
    assert set(d.closure) == d.omega | d.boundary
    assert all(not (x in d.boundary and y in d.boundary) for x, y, _ in d.boundary_graph.edges)
    again = build_domain(d.boundary_graph, d.omega)
    assert again.boundary_graph == d.boundary_graph
