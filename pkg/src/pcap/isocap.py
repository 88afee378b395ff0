"""Isocapacitary and Cheeger constants by exhaustive subset enumeration.

Pair constants share one table of capacities over all disjoint unordered
pairs of nonempty subsets of a host vertex set. Capacities do not depend on
the vertex measure, so the Neumann, Steklov, closed and rescaled-measure
constants are read off the same table with different normalizers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .capacity import TOL, LimitSequence
from .energy import check_p
from .errors import ConvergenceError, InvalidArgument, SizeError
from .graph import Domain, WeightedGraph, build_domain, truncation_domain
from .kernels import get_kernels

__all__ = [
    "IsocapResult",
    "PairTable",
    "pair_table",
    "alpha_dirichlet",
    "alpha_neumann",
    "alpha_neumann_bar",
    "alpha_steklov",
    "alpha_steklov_bar",
    "alpha_closed",
    "alpha_rescaled",
    "alpha_rescaled_sequence",
    "alpha_dirichlet_infinite",
    "cheeger_dirichlet",
    "cheeger_closed",
    "DIRICHLET_CAP",
    "PAIR_CAP",
]

DIRICHLET_CAP = 18
PAIR_CAP = 12
MAXIT = 10_000
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class IsocapResult:
    """Minimal capacity/volume ratio and the pair attaining it.

    ``witness_b`` is None for the Dirichlet constant (the partner set is the
    whole boundary). ``exhaustive`` is False for heuristic-mode results.
    """

    value: float
    witness_a: frozenset
    witness_b: frozenset | None
    capacity_at_witness: float
    pairs_examined: int
    exhaustive: bool = True
    kind: str = ""


def _bits(masks, h):
    return ((masks[:, None] >> np.arange(h)) & 1).astype(bool)


class PairTable:
    """Capacities of all disjoint unordered pairs over ``host`` (closure positions).

    ``A[k]`` and ``B[k]`` are membership rows over the closure; the smallest
    host vertex of ``A | B`` is always in ``A``.
    """

    def __init__(self, d: Domain, p, host, *, backend=None, cap=PAIR_CAP):
        p = check_p(p)
        host = np.asarray(host, dtype=np.int64)
        if host.size > cap:
            raise SizeError(f"pair enumeration over {host.size} vertices exceeds the cap of {cap}; "
                            "use heuristic mode")
        K = get_kernels(backend)
        ma, mb, caps, res, _ = K.pair_capacities(d.eu, d.ev, d.ew, d.m, host, p, TOL, MAXIT)
        if not res <= TOL:
            raise ConvergenceError("pair enumeration: capacity solve did not converge", residual=res)
        self.d, self.p, self.host = d, p, host
        self.cap = caps
        self.A = np.zeros((caps.size, d.n), dtype=bool)
        self.B = np.zeros((caps.size, d.n), dtype=bool)
        self.A[:, host] = _bits(ma, host.size)
        self.B[:, host] = _bits(mb, host.size)

    def __len__(self):
        return self.cap.size

    def within(self, mask) -> np.ndarray:
        """Pairs with both sets inside ``mask``."""
        out = ~mask
        return ~(self.A[:, out].any(axis=1) | self.B[:, out].any(axis=1))

    def best(self, eligible, weight, kind) -> IsocapResult:
        """Minimize cap / min(weight(A), weight(B)) over ``eligible`` pairs.

        Pairs with a zero normalizer are skipped (their ratio is infinite).
        """
        va, vb = self.A @ weight, self.B @ weight
        norm = np.minimum(va, vb)
        ok = eligible & (norm > 0)
        if not ok.any():
            raise InvalidArgument("no admissible pair")
        ratio = np.full(self.cap.size, np.inf)
        ratio[ok] = self.cap[ok] / norm[ok]
        return _pick(ratio, int(ok.sum()), lambda k: (self.d.subset(self.A[k]), self.d.subset(self.B[k])),
                     self.cap, kind)


def _pick(ratio, examined, witness, caps, kind, exhaustive=True) -> IsocapResult:
    vmin = float(ratio.min())
    ties = np.nonzero(ratio <= vmin * (1.0 + TIE_RTOL))[0]
    # deterministic witness: lexicographically smallest sorted vertex lists
    k = min(ties, key=lambda i: tuple(tuple(sorted(s)) if s is not None else () for s in witness(i)))
    a, b = witness(k)
    return IsocapResult(float(ratio[k]), a, b, float(caps[k]), examined, exhaustive, kind)


@lru_cache(maxsize=128)
def _table(d: Domain, p: float, host: tuple, backend) -> PairTable:
    return PairTable(d, p, np.array(host, dtype=np.int64), backend=backend)


def pair_table(d: Domain, p, host_mask=None, *, backend=None, cap=PAIR_CAP) -> PairTable:
    """Cached pair table; uses the whole closure when it fits under ``cap``."""
    p = check_p(p)
    if d.n <= cap:
        host = tuple(range(d.n))
    else:
        host = tuple(int(i) for i in np.nonzero(host_mask)[0])
        if len(host) > cap:
            raise SizeError(f"pair enumeration over {len(host)} vertices exceeds the cap of {cap}; "
                            "use heuristic mode")
    return _table(d, p, host, backend)


# --------------------------------------------------------------------------
# Dirichlet


@lru_cache(maxsize=128)
def _dirichlet_caps(d: Domain, p: float, backend):
    inner = np.nonzero(d.interior)[0].astype(np.int64)
    K = get_kernels(backend)
    caps, res, _ = K.dirichlet_capacities(d.eu, d.ev, d.ew, d.m, inner, d.boundary_mask.copy(),
                                          p, TOL, MAXIT)
    if not res <= TOL:
        raise ConvergenceError("Dirichlet enumeration: capacity solve did not converge", residual=res)
    return inner, caps


def alpha_dirichlet(d: Domain, p, *, backend=None, cap=DIRICHLET_CAP, heuristic=False) -> IsocapResult:
    """Minimum over nonempty A in omega of Cap(A, boundary) / m(A)."""
    p = check_p(p)
    if d.is_closed:
        raise InvalidArgument("Dirichlet constant needs a nonempty boundary")
    if heuristic and len(d.omega) > cap:
        return _heuristic_dirichlet(d, p, backend)
    if len(d.omega) > cap:
        raise SizeError(f"|omega| = {len(d.omega)} exceeds the enumeration cap of {cap}; "
                        "use heuristic mode")
    inner, caps = _dirichlet_caps(d, p, backend)
    members = _bits(np.arange(1, caps.size + 1, dtype=np.int64), inner.size)
    ratio = caps / (members @ d.m[inner])

    def witness(k):
        return frozenset(d.closure[i] for i in inner[members[k]]), None

    return _pick(ratio, caps.size, witness, caps, "dirichlet")


# --------------------------------------------------------------------------
# pair constants


def alpha_neumann(d: Domain, p, *, backend=None, heuristic=False) -> IsocapResult:
    """Pairs inside omega, normalized by the smaller volume."""
    if len(d.omega) < 2:
        raise InvalidArgument("Neumann constant needs at least 2 vertices in omega")
    if heuristic and len(d.omega) > PAIR_CAP:
        return _heuristic_pairs(d, p, d.interior, d.m, "neumann", backend)
    t = pair_table(d, p, d.interior, backend=backend)
    return t.best(t.within(d.interior), d.m, "neumann")


def alpha_neumann_bar(d: Domain, p, *, backend=None) -> IsocapResult:
    """Pairs in the closure, normalized by the smaller interior volume."""
    if len(d.omega) < 2:
        raise InvalidArgument("Neumann constant needs at least 2 vertices in omega")
    t = pair_table(d, p, np.ones(d.n, dtype=bool), backend=backend)
    return t.best(np.ones(len(t), dtype=bool), np.where(d.interior, d.m, 0.0), "neumann-bar")


def alpha_steklov(d: Domain, p, *, backend=None, heuristic=False) -> IsocapResult:
    """Pairs inside the boundary, normalized by the smaller volume."""
    if len(d.boundary) < 2:
        raise InvalidArgument("Steklov constant needs at least 2 boundary vertices")
    if heuristic and len(d.boundary) > PAIR_CAP:
        return _heuristic_pairs(d, p, d.boundary_mask, d.m, "steklov", backend)
    t = pair_table(d, p, d.boundary_mask, backend=backend)
    return t.best(t.within(d.boundary_mask), d.m, "steklov")


def alpha_steklov_bar(d: Domain, p, *, backend=None) -> IsocapResult:
    """Pairs in the closure, normalized by the smaller boundary volume."""
    if len(d.boundary) < 2:
        raise InvalidArgument("Steklov constant needs at least 2 boundary vertices")
    t = pair_table(d, p, np.ones(d.n, dtype=bool), backend=backend)
    return t.best(np.ones(len(t), dtype=bool), np.where(d.boundary_mask, d.m, 0.0), "steklov-bar")


def alpha_closed(g, p, *, backend=None, heuristic=False) -> IsocapResult:
    """Pair constant of a graph without boundary (or of a closure as such)."""
    d = build_domain(g, g.vertices) if isinstance(g, WeightedGraph) else g
    if d.n < 2:
        raise InvalidArgument("closed constant needs at least 2 vertices")
    full = np.ones(d.n, dtype=bool)
    if heuristic and d.n > PAIR_CAP:
        return _heuristic_pairs(d, p, full, d.m, "closed", backend)
    t = pair_table(d, p, full, backend=backend)
    return t.best(np.ones(len(t), dtype=bool), d.m, "closed")


def alpha_rescaled(d: Domain, p, k, *, backend=None) -> IsocapResult:
    """Closed constant of the closure with interior measure divided by ``k``."""
    if int(k) != k or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    t = pair_table(d, p, np.ones(d.n, dtype=bool), backend=backend)
    w = np.where(d.interior, d.m / k, d.m)
    return t.best(np.ones(len(t), dtype=bool), w, f"rescaled-{int(k)}")


def alpha_rescaled_sequence(d: Domain, p, ks, *, backend=None) -> LimitSequence:
    """``alpha(G^(k))`` for each ``k``, with the two-point boundary bound.

    ``extra["bound"]`` is the least Cap({x}, {y}) / min(m(x), m(y)) over
    boundary vertices x, y; it dominates every term, since singletons on
    the boundary keep their measure.
    """
    if len(d.boundary) < 2:
        raise InvalidArgument("needs at least 2 boundary vertices")
    out = tuple((int(k), alpha_rescaled(d, p, k, backend=backend).value) for k in ks)
    t = pair_table(d, p, np.ones(d.n, dtype=bool), backend=backend)
    single = (t.A.sum(axis=1) == 1) & (t.B.sum(axis=1) == 1) & t.within(d.boundary_mask)
    pb = t.best(single, d.m, "boundary-pair")
    vals = [v for _, v in out]
    mono = all(y >= x - 1e-9 * (1 + abs(x)) for x, y in zip(vals, vals[1:]))
    gap = abs(vals[-1] - vals[-2]) if len(vals) > 1 else math.nan
    return LimitSequence(out, mono, gap, {"bound": pb.value, "pair": (pb.witness_a, pb.witness_b)})


def alpha_dirichlet_infinite(family: str, p, radii, **kw) -> LimitSequence:
    """Dirichlet constant of ``W_r`` per radius; reported raw (no monotonicity claim)."""
    out = tuple((r, alpha_dirichlet(truncation_domain(family, r), p, **kw).value)
                for r in sorted(radii))
    vals = [v for _, v in out]
    gap = abs(vals[-1] - vals[-2]) if len(vals) > 1 else math.nan
    return LimitSequence(out, None, gap)


# --------------------------------------------------------------------------
# heuristic mode: sweep sets of the p = 2 eigenfunction


def _sweep_order(d: Domain, kind):
    from .eigen import _exact_p2, _problem

    _, u = _exact_p2(_problem(d, kind))
    return np.argsort(-u, kind="stable")


def _heuristic_dirichlet(d, p, backend):
    from .capacity import capacity

    order = [i for i in _sweep_order(d, "dirichlet") if d.interior[i]]
    ratio, caps, sets = [], [], []
    for j in range(1, len(order) + 1):
        a = frozenset(d.closure[i] for i in order[:j])
        c = capacity(d, a, d.boundary, p, backend=backend).value
        ratio.append(c / sum(d.m[order[:j]]))
        caps.append(c)
        sets.append((a, None))
    return _pick(np.array(ratio), len(sets), lambda k: sets[k], np.array(caps), "dirichlet", False)


def _heuristic_pairs(d, p, mask, weight, kind, backend):
    from .capacity import capacity

    prob = {"neumann": "neumann", "steklov": "steklov", "closed": "closed"}[kind]
    order = [i for i in _sweep_order(d, prob) if mask[i]]
    ratio, caps, sets = [], [], []
    for i in range(1, len(order)):
        for j in range(i, len(order)):
            ia, ib = order[:i], order[j:]
            a = frozenset(d.closure[x] for x in ia)
            b = frozenset(d.closure[x] for x in ib)
            c = capacity(d, a, b, p, backend=backend).value
            ratio.append(c / min(sum(weight[ia]), sum(weight[ib])))
            caps.append(c)
            sets.append((a, b) if min(a) < min(b) else (b, a))
    return _pick(np.array(ratio), len(sets), lambda k: sets[k], np.array(caps), kind, False)


# --------------------------------------------------------------------------
# Cheeger constants


def _cut_and_volume(g: WeightedGraph, verts, sub):
    """Edge-boundary weight and volume of every nonempty subset of ``sub``."""
    pos = {x: i for i, x in enumerate(verts)}
    h = len(sub)
    bits = np.zeros(((1 << h) - 1, len(verts)), dtype=bool)
    bits[:, [pos[x] for x in sub]] = _bits(np.arange(1, 1 << h, dtype=np.int64), h)
    cut = np.zeros(bits.shape[0])
    for (x, y), w in g.weights.items():
        cut += w * (bits[:, pos[x]] != bits[:, pos[y]])
    vol = bits @ np.array([g.m(x) for x in verts])
    return bits, cut, vol


def cheeger_dirichlet(d: Domain, *, cap=DIRICHLET_CAP) -> float:
    """Least |dW|_w / m(W) over nonempty W in omega (edges of the host graph)."""
    if len(d.omega) > cap:
        raise SizeError(f"|omega| = {len(d.omega)} exceeds the enumeration cap of {cap}")
    g = d.boundary_graph
    _, cut, vol = _cut_and_volume(g, g.vertices, sorted(d.omega))
    return float(np.min(cut / vol))


def cheeger_closed(g, *, cap=DIRICHLET_CAP) -> float:
    """Least |dW|_w / min(m(W), m(W^c)) over nonempty proper W."""
    if isinstance(g, Domain):
        g = g.boundary_graph
    verts = g.vertices
    if len(verts) < 2:
        raise InvalidArgument("Cheeger constant needs at least 2 vertices")
    if len(verts) > cap:
        raise SizeError(f"{len(verts)} vertices exceed the enumeration cap of {cap}")
    bits, cut, vol = _cut_and_volume(g, verts, verts)
    total = sum(g.m(x) for x in verts)
    proper = bits.sum(axis=1) < len(verts)
    return float(np.min(cut[proper] / np.minimum(vol[proper], total - vol[proper])))
