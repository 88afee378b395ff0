import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcap.energy import (check_p, green_residual, laplacian_all, linf_norm, lp_norm,
                         normal_derivative, p_energy, p_laplacian, p_mean, weighted_p_mean)
from pcap.errors import InvalidArgument
from pcap.graph import build_domain, generate

from conftest import path_domain

exponents = st.floats(1.05, 6.0)


def linear(d, n):
    return {x: 1 - int(x) / n for x in d.closure}


def test_energy_examples(path4):
    f = linear(path4, 4)
    assert p_energy(path4, f, 2) == pytest.approx(0.25, rel=1e-14)
    assert p_energy(path4, f, 3) == pytest.approx(0.0625, rel=1e-14)
    assert p_energy(path4, {x: 3.0 for x in path4.closure}, 2.5) == 0


def test_laplacian_examples(path4):
    f = linear(path4, 4)
    for x in path4.omega:
        assert p_laplacian(path4, f, 1.7, x) == pytest.approx(0, abs=1e-15)
    d = path_domain(2)
    assert p_laplacian(d, {"0": 0, "1": 1, "2": 0}, 2, "1") == -2
    with pytest.raises(InvalidArgument):
        p_laplacian(path4, f, 2, "0")


def test_normal_derivative(path4):
    f = linear(path4, 4)
    assert normal_derivative(path4, f, 2, "0") == pytest.approx(0.25)
    assert normal_derivative(path4, {x: 1.0 for x in path4.closure}, 3, "4") == 0
    with pytest.raises(InvalidArgument):
        normal_derivative(path4, f, 2, "2")


def test_norms(path4, k2):
    f = {x: 1.0 for x in path4.closure}
    assert lp_norm(path4, f, 3, path4.omega) == pytest.approx(3 ** (1 / 3))
    assert lp_norm(path4, {x: 0.0 for x in path4.closure}, 3) == 0
    assert linf_norm(k2, {"0": -2.0, "1": 1.0}) == 2


def test_p_mean_examples():
    vals = np.array([0.0, 1.0])
    assert weighted_p_mean(vals, np.array([1.0, 2.0]), 2) == pytest.approx(2 / 3)
    for p in (1.1, 1.5, 3, 7):
        assert weighted_p_mean(vals, np.ones(2), p) == pytest.approx(0.5, abs=1e-12)


def test_check_p():
    for bad in (1.0, 0.5, -2, math.inf, math.nan):
        with pytest.raises(InvalidArgument):
            check_p(bad)
    assert check_p(2) == 2.0


def corpus_domains():
    out = [path_domain(4)]
    g = generate("random", 8, 0.5, (0.5, 2), 5, (0.5, 2))
    out.append(build_domain(g, g.vertices[:4]))
    out.append(build_domain(g, g.vertices))
    return out


@pytest.mark.parametrize("d", corpus_domains(), ids=["path4", "random-half", "random-closed"])
def test_green_identity_random(d):
    rng = np.random.default_rng(0)
    for _ in range(100):
        f = rng.standard_normal(d.n)
        g = rng.standard_normal(d.n)
        p = rng.uniform(1.1, 5)
        assert green_residual(d, f, g, p) <= 1e-10
    f = rng.standard_normal(d.n)
    assert green_residual(d, f, np.zeros(d.n), 2.5) == 0
    assert green_residual(d, np.ones(d.n), f, 2.5) == 0


@given(st.integers(0, 10_000), exponents, st.floats(-3, 3), st.floats(-5, 5))
def test_energy_scaling_translation(seed, p, t, c):
    d = corpus_domains()[1]
    f = np.random.default_rng(seed).standard_normal(d.n)
    e = p_energy(d, f, p)
    assert p_energy(d, t * f, p) == pytest.approx(abs(t) ** p * e, rel=1e-10, abs=1e-300)
    assert p_energy(d, f + c, p) == pytest.approx(e, rel=1e-9)


@given(st.integers(0, 10_000), exponents)
def test_divergence_form(seed, p):
    d = corpus_domains()[1]
    f = np.random.default_rng(seed).standard_normal(d.n)
    lap = laplacian_all(d, f, p)
    assert abs(np.dot(lap, d.m)) <= 1e-10 * (1 + np.abs(lap * d.m).sum())
    for z in d.boundary:
        assert normal_derivative(d, f, p, z) == pytest.approx(-lap[d.index[z]], abs=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.data(), exponents)
def test_p_mean_first_order(vals, data, p):
    m = np.array(data.draw(st.lists(st.floats(0.1, 3), min_size=len(vals), max_size=len(vals))))
    v = np.array(vals)
    c = weighted_p_mean(v, m, p)
    assert v.min() - 1e-12 <= c <= v.max() + 1e-12

    def deriv(x):
        r = v - x
        return np.sum(m * np.sign(r) * np.abs(r) ** (p - 1))

    # the derivative decreases in c and changes sign within the tolerance
    step = 2e-13 * (1 + np.abs(v).max())
    assert deriv(c - step) >= 0 >= deriv(c + step)
    if 2 <= p <= 3:
        # slope of the derivative is at most (p-1) sum m |r|^(p-2), bounded here
        assert abs(deriv(c)) <= 1e-9 * (1 + m.sum())


def test_p_mean_over_subset(path4):
    f = np.array([5.0, 0.0, 1.0, 2.0, 9.0])
    assert p_mean(path4, f, 2, over=path4.omega) == pytest.approx(1.0)
    assert p_mean(path4, f, 2) == pytest.approx(17 / 5)
