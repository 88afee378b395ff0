import math

import numpy as np
import pytest

from pcap.energy import p_energy, weighted_p_mean
from pcap.errors import InvalidArgument
from pcap.eigen import (closed_eigenvalue, dirichlet_eigenvalue, eigenvalue_infinite,
                        neumann_eigenvalue, steklov_eigenvalue, steklov_via_rescaling)
from pcap.graph import build_domain, generate

import oracles
from conftest import path_domain


def ids(*xs):
    return frozenset(str(x) for x in xs)


def random_half(seed, n=8):
    g = generate("random", n, 0.5, (0.5, 2), seed, (0.5, 2))
    half = g.vertices[: n // 2]
    return build_domain(g, half if g.is_connected(half) else g.vertices[:2])


def test_dirichlet_examples(path4):
    assert dirichlet_eigenvalue(path4, 2).value == pytest.approx(2 - math.sqrt(2), rel=1e-12)
    for p in (1.3, 2.0, 3.5):
        assert dirichlet_eigenvalue(path_domain(2), p).value == pytest.approx(2, rel=1e-9)
    g = path4.boundary_graph.scaled(weight_factor=2.5)
    d = build_domain(g, path4.omega)
    for p in (1.5, 3.0):
        assert dirichlet_eigenvalue(d, p).value == pytest.approx(
            2.5 * dirichlet_eigenvalue(path4, p).value, rel=1e-8)


def test_neumann_examples(k2):
    k4 = generate("complete", 4)
    assert neumann_eigenvalue(k4, 2).value == pytest.approx(4)
    assert neumann_eigenvalue(generate("cycle", 4), 2).value == pytest.approx(2)
    for p in (1.2, 1.5, 2.0, 3.0, 4.0):
        r = neumann_eigenvalue(k2, p)
        assert r.value == pytest.approx(2 ** (p - 1), rel=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_steklov_path(n, p):
    r = steklov_eigenvalue(path_domain(n), p)
    assert r.value == pytest.approx(2 ** (p - 1) * n ** (1 - p), rel=1e-6)


def check_result(d, r, p, kind):
    f = d.as_array(r.eigenfunction)
    assert np.max(np.abs(f)) == pytest.approx(1.0)
    assert r.residual <= 1e-6
    assert r.quotient == pytest.approx(r.value, rel=1e-8)
    if kind == "dirichlet":
        assert f.min() >= 0
    else:
        assert f.min() < 0 < f.max()
    if kind in ("neumann", "closed"):
        m = d.m if kind == "closed" else np.where(d.interior, d.m, 0.0)
        c = weighted_p_mean(f, m, p)
        r0 = f - c
        assert abs(np.sum(m * np.sign(r0) * np.abs(r0) ** (p - 1))) <= 1e-6 * m.sum()


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("p", [1.5, 3.0])
def test_certificates(seed, p):
    d = random_half(seed)
    check_result(d, dirichlet_eigenvalue(d, p), p, "dirichlet")
    check_result(d, neumann_eigenvalue(d, p, restarts=8), p, "neumann")
    full = build_domain(d.graph, d.graph.vertices)
    check_result(full, closed_eigenvalue(full, p, restarts=8), p, "closed")
    if len(d.boundary) >= 2:
        r = steklov_eigenvalue(d, p, restarts=8)
        check_result(d, r, p, "steklov")
        # the value does not move when the boundary data shift by a constant
        f = d.as_array(r.eigenfunction)
        assert p_energy(d, f + 3.0, p) == pytest.approx(p_energy(d, f, p), rel=1e-9)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_p2_oracles_and_descent(seed):
    d = random_half(seed, n=7 + seed % 4)
    full = build_domain(d.graph, d.graph.vertices)
    pairs = [(dirichlet_eigenvalue, d, oracles.dirichlet_p2(d)),
             (neumann_eigenvalue, d, oracles.neumann_p2(d)),
             (neumann_eigenvalue, full, oracles.closed_p2(full))]
    if len(d.boundary) >= 2:
        pairs.append((steklov_eigenvalue, d, oracles.steklov_p2(d)))
    for fn, dom, ref in pairs:
        exact = fn(dom, 2)
        assert exact.method == "p2-exact"
        assert exact.value == pytest.approx(ref, rel=1e-9)
        desc = fn(dom, 2, descent=True, restarts=4)
        assert desc.method == "rayleigh-descent"
        assert desc.value == pytest.approx(ref, rel=1e-7)


def test_homogeneity():
    d = random_half(2)
    g = d.graph
    for p in (1.5, 3.0):
        base = neumann_eigenvalue(d, p, restarts=8).value
        heavy = build_domain(g.scaled(measure_factor=4.0), d.omega)
        assert neumann_eigenvalue(heavy, p, restarts=8).value == pytest.approx(base / 4, rel=1e-8)
        strong = build_domain(g.scaled(weight_factor=3.0), d.omega)
        assert neumann_eigenvalue(strong, p, restarts=8).value == pytest.approx(3 * base, rel=1e-8)


def test_rescaling_limit(path4):
    seq = steklov_via_rescaling(path4, 2, [1, 4, 64, 1024])
    sigma = steklov_eigenvalue(path4, 2).value
    assert seq.values[0] == pytest.approx(closed_eigenvalue(path4, 2).value)
    assert seq.values[-1] == pytest.approx(0.5, rel=1e-3)
    assert all(v <= sigma + 1e-8 for v in seq.values)
    assert seq.monotone


def test_infinite():
    seq = eigenvalue_infinite("half-line", 2, [2, 4, 8])
    assert seq.monotone and all(v >= 0 for v in seq.values)
    assert seq.values[-1] < 0.1
    tree = eigenvalue_infinite("regular-tree(3)", 1.5, [1, 2])
    assert tree.monotone and min(tree.values) > 0


def test_errors(k2):
    with pytest.raises(InvalidArgument):
        dirichlet_eigenvalue(k2, 2)
    with pytest.raises(InvalidArgument):
        steklov_eigenvalue(build_domain(generate("star", 3), ids(1)), 2)
    with pytest.raises(InvalidArgument):
        neumann_eigenvalue(build_domain(generate("path", 3), ids(1)), 2)


def test_flat_eigenfunction_offsets():
    # p < 2: this minimizer is flat on an edge that still carries flux, so
    # the certificate needs the sub-resolution edge offsets
    from pcap.harness import _build_graph, _graph_name, corpus_domains, default_corpus

    entry = next(e for e in default_corpus() if e["family"] == "random" and e["params"][3] == 2)
    g = _build_graph(entry)
    (_, d), = corpus_domains(g, _graph_name(entry), 42, ("half",))
    r = steklov_eigenvalue(d, 1.2)
    assert r.residual <= 1e-6
    assert r.edge_offsets
    assert all(abs(v) < 1e-10 for v in r.edge_offsets.values())
