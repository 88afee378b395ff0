import math

import numpy as np
import pytest

from pcap.capacity import capacity
from pcap.errors import InvalidArgument, SizeError
from pcap.graph import build_domain, generate, rescale_measure, truncation_domain, volume
from pcap.isocap import (alpha_closed, alpha_dirichlet, alpha_dirichlet_infinite, alpha_neumann,
                         alpha_neumann_bar, alpha_rescaled_sequence, alpha_steklov,
                         alpha_steklov_bar, cheeger_closed, cheeger_dirichlet)

import oracles
from conftest import path_domain


def ids(*xs):
    return frozenset(str(x) for x in xs)


def naive(d, p, kind):
    cap = (lambda a, b: oracles.capacity_p2(d, a, b)) if p == 2 else \
        (lambda a, b: capacity(d, a, b, p).value)
    return oracles.naive_isocap(d, kind, cap)


def small_domains():
    out = {"path4": path_domain(4), "star4-leafs": None}
    g = generate("star", 4)
    out["star4-leafs"] = build_domain(g, ids(0, 1))
    r = generate("random", 6, 0.6, (0.5, 2), 11, (0.5, 2))
    out["random6-closed"] = build_domain(r, r.vertices)
    out["random6-half"] = build_domain(r, r.vertices[:3]) if r.is_connected(r.vertices[:3]) \
        else build_domain(r, r.vertices[:2])
    return out


DOMAINS = small_domains()


@pytest.mark.parametrize("name", sorted(DOMAINS))
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_against_naive_enumeration(name, p):
    d = DOMAINS[name]
    tol = dict(rel=1e-9)
    if not d.is_closed:
        assert alpha_dirichlet(d, p).value == pytest.approx(naive(d, p, "dirichlet"), **tol)
        if len(d.boundary) >= 2:
            assert alpha_steklov(d, p).value == pytest.approx(naive(d, p, "steklov"), **tol)
            assert alpha_steklov_bar(d, p).value == pytest.approx(naive(d, p, "steklov-bar"), **tol)
    if len(d.omega) >= 2:
        assert alpha_neumann(d, p).value == pytest.approx(naive(d, p, "neumann"), **tol)
        assert alpha_neumann_bar(d, p).value == pytest.approx(naive(d, p, "neumann-bar"), **tol)
    assert alpha_closed(d, p).value == pytest.approx(naive(d, p, "closed"), **tol)


def test_examples(path4, k2):
    assert alpha_dirichlet(path_domain(2), 2).value == pytest.approx(2)
    r = alpha_closed(k2.boundary_graph, 2)
    assert r.value == pytest.approx(1) and {r.witness_a, r.witness_b} == {ids(0), ids(1)}
    assert alpha_neumann(k2, 2).value == pytest.approx(1)
    for n, p in [(4, 2), (2, 3), (3, 1.5), (6, 3)]:
        s = alpha_steklov(path_domain(n), p)
        assert s.value == pytest.approx(n ** (1 - p), rel=1e-9)
        assert {s.witness_a, s.witness_b} == {ids(0), ids(n)}


def test_result_invariants(path4):
    for r in (alpha_dirichlet(path4, 2.5), alpha_neumann(path4, 2.5), alpha_steklov(path4, 2.5)):
        assert r.exhaustive and r.pairs_examined > 0
        if r.witness_b is None:
            den = volume(path4, r.witness_a)
        else:
            den = min(volume(path4, r.witness_a), volume(path4, r.witness_b))
        assert r.value == pytest.approx(r.capacity_at_witness / den, rel=1e-9)
    upper = capacity(path4, path4.omega, path4.boundary, 2.5).value / 3
    assert alpha_dirichlet(path4, 2.5).value <= upper * (1 + 1e-12)


def test_scaling_and_swap():
    g = generate("random", 6, 0.6, (0.5, 2), 4)
    base = alpha_closed(g, 2.5)
    assert alpha_closed(g.scaled(weight_factor=3.0), 2.5).value == pytest.approx(3 * base.value)
    a, b = base.witness_a, base.witness_b
    d = build_domain(g, g.vertices)
    assert capacity(d, b, a, 2.5).value == pytest.approx(base.capacity_at_witness, rel=1e-9)


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("p", [1.5, 3.0])
def test_bar_equalities(seed, p):
    g = generate("random", 7, 0.5, (0.5, 2), seed, (0.5, 2))
    d = build_domain(g, g.vertices[:4]) if g.is_connected(g.vertices[:4]) else \
        build_domain(g, g.vertices[:3])
    assert alpha_neumann(d, p).value == pytest.approx(alpha_neumann_bar(d, p).value, rel=1e-9)
    if len(d.boundary) >= 2:
        assert alpha_steklov(d, p).value == pytest.approx(alpha_steklov_bar(d, p).value, rel=1e-9)


def test_rescaled_sequence(path4):
    for p in (1.5, 2.0, 3.0):
        seq = alpha_rescaled_sequence(path4, p, [1, 2, 4, 8, 16])
        assert seq.monotone
        assert max(seq.values) <= seq.extra["bound"] * (1 + 1e-9)
        assert seq.values[0] == pytest.approx(alpha_closed(path4, p).value)
        k = alpha_rescaled_sequence(path4, p, [1 << 12]).values[0]
        assert k == pytest.approx(alpha_steklov_bar(path4, p).value, rel=1e-3)
    big = rescale_measure(path4, 4)
    assert alpha_closed(big, 2).value == pytest.approx(
        alpha_rescaled_sequence(path4, 2, [4]).values[0])


def test_cheeger(path4, k2):
    # brute force over the 7 subsets of {1, 2, 3}
    g = path4.boundary_graph
    best = min(sum(g.weight(x, y) for x in w for y in g.vertices if y not in w) / len(w)
               for w in oracles.nonempty_subsets(path4.omega))
    assert cheeger_dirichlet(path4) == pytest.approx(best)
    assert best == pytest.approx(2 / 3)
    assert cheeger_closed(k2.boundary_graph) == pytest.approx(1)
    c = generate("cycle", 5)
    assert cheeger_closed(c.scaled(weight_factor=2.5)) == pytest.approx(2.5 * cheeger_closed(c))


def test_caps_and_errors(k2):
    with pytest.raises(InvalidArgument):
        alpha_dirichlet(k2, 2)
    with pytest.raises(InvalidArgument):
        alpha_steklov(k2, 2)
    big = generate("path", 20)
    d = build_domain(big, [str(i) for i in range(1, 20)])
    with pytest.raises(SizeError):
        alpha_dirichlet(d, 2)
    with pytest.raises(SizeError):
        alpha_neumann(d, 2)
    h = alpha_neumann(d, 2, heuristic=True)
    assert not h.exhaustive and h.value > 0


def test_dirichlet_infinite_raw():
    seq = alpha_dirichlet_infinite("half-line", 2, [1, 2, 4])
    assert seq.monotone is None
    assert seq.values[-1] < seq.values[0]
    tree = alpha_dirichlet_infinite("regular-tree(3)", 2, [1, 2])
    assert min(tree.values) > 0
    d = truncation_domain("half-line", 2)
    assert seq.values[1] == pytest.approx(alpha_dirichlet(d, 2).value)
