"""Weighted graphs, domains with vertex boundary, generators and file I/O.

Vertex ids are opaque strings ordered lexicographically; every array exposed
by a :class:`Domain` is indexed in that order over the closure.
"""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainDisconnected, InvalidArgument, ParseError, ValidationError

__all__ = [
    "WeightedGraph",
    "Domain",
    "Exhaustion",
    "vertex_boundary",
    "build_domain",
    "volume",
    "edge_cut",
    "generate",
    "truncate",
    "truncation_domain",
    "rescale_measure",
    "load_graph",
    "save_graph",
    "load_domain",
    "save_domain",
]


def _edge_key(x, y):
    return (x, y) if x < y else (y, x)


def _positive(value, what):
    v = float(value)
    if not math.isfinite(v) or v <= 0.0:
        raise ValidationError(f"{what} must be a positive finite number, got {value!r}")
    return v


class WeightedGraph:
    """Undirected simple graph with positive vertex measure and edge weights.

    ``weights`` maps vertex pairs to weights; each unordered pair may appear
    once. Non-edges are simply absent.
    """

    __slots__ = ("_measure", "_weights", "_vertices", "_adj")

    def __init__(self, measure: Mapping[str, float], weights: Mapping[tuple, float]):
        meas = {}
        for x, mx in measure.items():
            if not isinstance(x, str):
                raise ValidationError(f"vertex ids must be strings, got {x!r}")
            meas[x] = _positive(mx, f"measure of vertex {x!r}")
        wts = {}
        for pair, wxy in weights.items():
            x, y = tuple(pair)
            if x == y:
                raise ValidationError(f"self-loop at vertex {x!r}")
            for z in (x, y):
                if z not in meas:
                    raise ValidationError(f"edge endpoint {z!r} is not a vertex")
            key = _edge_key(x, y)
            if key in wts:
                raise ValidationError(f"duplicate edge {key}")
            wts[key] = _positive(wxy, f"weight of edge {key}")
        adj = {x: [] for x in meas}
        for x, y in wts:
            adj[x].append(y)
            adj[y].append(x)
        self._measure = MappingProxyType(dict(sorted(meas.items())))
        self._weights = MappingProxyType(dict(sorted(wts.items())))
        self._vertices = tuple(self._measure)
        self._adj = MappingProxyType({x: tuple(sorted(v)) for x, v in adj.items()})

    @property
    def vertices(self) -> tuple:
        return self._vertices

    @property
    def measure(self) -> Mapping[str, float]:
        return self._measure

    @property
    def weights(self) -> Mapping[tuple, float]:
        return self._weights

    @property
    def edges(self) -> list[tuple[str, str, float]]:
        return [(x, y, w) for (x, y), w in self._weights.items()]

    def neighbors(self, x) -> tuple:
        return self._adj[x]

    def weight(self, x, y) -> float:
        return self._weights.get(_edge_key(x, y), 0.0)

    def m(self, x) -> float:
        return self._measure[x]

    def __contains__(self, x):
        return x in self._measure

    def __len__(self):
        return len(self._vertices)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return dict(self._measure) == dict(other._measure) and dict(self._weights) == dict(other._weights)

    def __hash__(self):
        return hash((tuple(self._measure.items()), tuple(self._weights.items())))

    def __repr__(self):
        return f"WeightedGraph(|V|={len(self._vertices)}, |E|={len(self._weights)})"

    def degree(self, x) -> float:
        return sum(self.weight(x, y) for y in self._adj[x])

    def is_connected(self, subset: Iterable | None = None) -> bool:
        """Connectivity of the subgraph induced on ``subset`` (default: all)."""
        nodes = set(self._vertices if subset is None else subset)
        if not nodes:
            return False
        start = min(nodes)
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in self._adj[x]:
                if y in nodes and y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == len(nodes)

    def scaled(self, weight_factor=1.0, measure_factor=1.0) -> "WeightedGraph":
        return WeightedGraph(
            {x: measure_factor * mx for x, mx in self._measure.items()},
            {k: weight_factor * w for k, w in self._weights.items()},
        )

    def with_measure(self, measure: Mapping[str, float]) -> "WeightedGraph":
        return WeightedGraph(measure, self._weights)


def _as_set(g, subset) -> frozenset:
    if isinstance(subset, str):
        subset = (subset,)
    s = frozenset(subset)
    missing = [x for x in s if x not in g]
    if missing:
        raise InvalidArgument(f"vertices not in host: {sorted(missing)}")
    return s


def vertex_boundary(g: WeightedGraph, omega) -> frozenset:
    """Exterior vertices adjacent to ``omega``."""
    om = _as_set(g, omega)
    if not om:
        raise InvalidArgument("omega must be nonempty")
    return frozenset(y for x in om for y in g.neighbors(x) if y not in om)


def volume(host, subset) -> float:
    """Total measure of ``subset``; ``host`` is a graph or a domain."""
    g = host.boundary_graph if isinstance(host, Domain) else host
    return float(sum(g.m(x) for x in _as_set(g, subset)))


def edge_cut(g: WeightedGraph, a, b) -> set:
    """Edges with one endpoint in ``a`` and the other in ``b``."""
    a, b = _as_set(g, a), _as_set(g, b)
    out = set()
    for x in a:
        for y in g.neighbors(x):
            if y in b:
                out.add(_edge_key(x, y))
    return out


class Domain:
    """A vertex set with its boundary, closure and boundary graph.

    The boundary graph keeps the closure with every measure, but only edges
    that touch the interior (edges between two boundary vertices are dropped).
    Build instances with :func:`build_domain`.
    """

    def __init__(self, graph: WeightedGraph, omega: frozenset, boundary: frozenset,
                 boundary_graph: WeightedGraph):
        self.graph = graph
        self.omega = omega
        self.boundary = boundary
        self.boundary_graph = boundary_graph
        self.closure = boundary_graph.vertices
        self.index = MappingProxyType({x: i for i, x in enumerate(self.closure)})
        n = len(self.closure)
        self.m = np.array([boundary_graph.m(x) for x in self.closure], dtype=np.float64)
        self.interior = np.array([x in omega for x in self.closure], dtype=bool)
        self.boundary_mask = ~self.interior
        edges = boundary_graph.edges
        self.eu = np.array([self.index[x] for x, _, _ in edges], dtype=np.int64)
        self.ev = np.array([self.index[y] for _, y, _ in edges], dtype=np.int64)
        self.ew = np.array([w for _, _, w in edges], dtype=np.float64)
        for arr in (self.m, self.interior, self.boundary_mask, self.eu, self.ev, self.ew):
            arr.setflags(write=False)
        self.n = n

    @property
    def is_closed(self) -> bool:
        return not self.boundary

    def mask(self, subset) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        for x in _as_set(self.boundary_graph, subset):
            out[self.index[x]] = True
        return out

    def subset(self, mask) -> frozenset:
        return frozenset(x for x, keep in zip(self.closure, mask) if keep)

    def as_array(self, values) -> np.ndarray:
        """Potential on the closure as an array in closure order."""
        if isinstance(values, Mapping):
            missing = [x for x in self.closure if x not in values]
            if missing:
                raise InvalidArgument(f"potential undefined at {missing}")
            return np.array([float(values[x]) for x in self.closure])
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (self.n,):
            raise InvalidArgument(f"potential must have shape ({self.n},), got {arr.shape}")
        return arr

    def as_dict(self, arr) -> dict:
        return {x: float(v) for x, v in zip(self.closure, arr)}

    def __repr__(self):
        return f"Domain(|omega|={len(self.omega)}, |boundary|={len(self.boundary)})"


def build_domain(g: WeightedGraph, omega) -> Domain:
    """Domain of ``omega`` in ``g``; the closure must induce a connected subgraph."""
    om = _as_set(g, omega)
    bd = vertex_boundary(g, om)
    closure = om | bd
    if not g.is_connected(closure):
        raise DomainDisconnected("closure of omega is not connected in the host graph")
    weights = {}
    for x in om:
        for y in g.neighbors(x):
            weights[_edge_key(x, y)] = g.weight(x, y)
    bg = WeightedGraph({x: g.m(x) for x in closure}, weights)
    return Domain(g, om, bd, bg)


def rescale_measure(d: Domain, k: int) -> Domain:
    """Same domain with interior measure divided by ``k``; boundary untouched."""
    if int(k) != k or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    bg = d.boundary_graph
    meas = {x: (bg.m(x) / k if x in d.omega else bg.m(x)) for x in bg.vertices}
    return build_domain(bg.with_measure(meas), d.omega)


# --------------------------------------------------------------------------
# generators


def _path(n):
    if n < 1:
        raise InvalidArgument("path needs n >= 1")
    vs = [str(i) for i in range(n + 1)]
    return WeightedGraph({v: 1.0 for v in vs}, {(vs[i], vs[i + 1]): 1.0 for i in range(n)})


def _cycle(n):
    if n < 3:
        raise InvalidArgument("cycle needs n >= 3")
    vs = [str(i) for i in range(n)]
    return WeightedGraph({v: 1.0 for v in vs}, {(vs[i], vs[(i + 1) % n]): 1.0 for i in range(n)})


def _complete(n):
    if n < 2:
        raise InvalidArgument("complete needs n >= 2")
    vs = [str(i) for i in range(n)]
    return WeightedGraph({v: 1.0 for v in vs},
                         {(vs[i], vs[j]): 1.0 for i in range(n) for j in range(i + 1, n)})


def _grid(r, c):
    if r < 1 or c < 1 or r * c < 2:
        raise InvalidArgument("grid needs r, c >= 1 and at least two vertices")
    name = lambda i, j: f"{i},{j}"  # noqa: E731
    meas = {name(i, j): 1.0 for i in range(r) for j in range(c)}
    wts = {}
    for i in range(r):
        for j in range(c):
            if i + 1 < r:
                wts[(name(i, j), name(i + 1, j))] = 1.0
            if j + 1 < c:
                wts[(name(i, j), name(i, j + 1))] = 1.0
    return WeightedGraph(meas, wts)


def _star(n):
    if n < 1:
        raise InvalidArgument("star needs n >= 1 leaves")
    meas = {str(i): 1.0 for i in range(n + 1)}
    return WeightedGraph(meas, {("0", str(i)): 1.0 for i in range(1, n + 1)})


def _random(n, prob, weight_range=(1.0, 1.0), seed=0, measure_range=None):
    n = int(n)
    if n < 2:
        raise InvalidArgument("random needs n >= 2")
    if not 0.0 < prob <= 1.0:
        raise InvalidArgument(f"edge probability must lie in (0, 1], got {prob}")
    lo, hi = map(float, weight_range)
    if not 0.0 < lo <= hi:
        raise InvalidArgument(f"bad weight range {weight_range}")
    if measure_range is not None:
        mlo, mhi = map(float, measure_range)
        if not 0.0 < mlo <= mhi:
            raise InvalidArgument(f"bad measure range {measure_range}")
    rng = np.random.default_rng(seed)
    vs = [str(i) for i in range(n)]
    for _ in range(100):
        wts = {}
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < prob:
                    wts[(vs[i], vs[j])] = float(rng.uniform(lo, hi))
        if measure_range is None:
            meas = {v: 1.0 for v in vs}
        else:
            meas = {v: float(rng.uniform(mlo, mhi)) for v in vs}
        g = WeightedGraph(meas, wts)
        if g.is_connected():
            return g
    raise InvalidArgument(f"no connected random graph after 100 attempts (n={n}, prob={prob})")


_FAMILIES = {
    "path": _path,
    "cycle": _cycle,
    "complete": _complete,
    "grid": _grid,
    "star": _star,
    "random": _random,
}


def generate(family: str, *params, **kwargs) -> WeightedGraph:
    """Build a named graph family, e.g. ``generate("path", 4)``.

    ``random(n, prob, weight_range, seed[, measure_range])`` is deterministic
    in ``seed`` and retries until the graph is connected.
    """
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise InvalidArgument(f"unknown family {family!r}; choose from {sorted(_FAMILIES)}") from None
    try:
        return builder(*params, **kwargs)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for {family}: {exc}") from None


# --------------------------------------------------------------------------
# truncations of infinite graphs


@dataclass(frozen=True)
class Exhaustion:
    """Nested finite vertex sets ``W_1 <= W_2 <= ...``."""

    family: tuple
    generator: str

    def __post_init__(self):
        for small, big in zip(self.family, self.family[1:]):
            if not small <= big:
                raise ValidationError("exhaustion is not nested")

    def __len__(self):
        return len(self.family)

    def __getitem__(self, i):
        return self.family[i]


_INFINITE_ALIASES = {
    "integer-line": "integer-line", "z": "integer-line", "Z": "integer-line",
    "half-line": "half-line", "n": "half-line", "N": "half-line",
    "lattice": "lattice", "z2": "lattice", "Z2": "lattice",
    "regular-tree": "regular-tree", "tree": "regular-tree",
}


def parse_infinite_family(spec: str) -> tuple[str, int]:
    """``"regular-tree(3)"`` -> ``("regular-tree", 3)``; degree defaults to 3."""
    m = re.fullmatch(r"\s*([A-Za-z0-9\-]+)\s*(?:\(\s*(\d+)\s*\))?\s*", spec)
    if not m or m.group(1) not in _INFINITE_ALIASES:
        raise InvalidArgument(f"unknown infinite family {spec!r}")
    return _INFINITE_ALIASES[m.group(1)], int(m.group(2) or 3)


def _ball_graph(root, neighbors, radius):
    dist = {root: 0}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        if dist[x] == radius:
            continue
        for y in neighbors(x):
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    wts = {}
    for x in dist:
        for y in neighbors(x):
            if y in dist:
                wts[_edge_key(x, y)] = 1.0
    g = WeightedGraph({x: 1.0 for x in dist}, wts)
    balls = tuple(frozenset(x for x, r in dist.items() if r <= i) for i in range(1, radius + 1))
    return g, balls


def truncate(family: str, radius: int, degree: int | None = None):
    """Ball of ``radius`` around the root of an infinite family, plus its exhaustion.

    Families: ``integer-line``, ``half-line``, ``lattice`` (Z^2, graph
    distance) and ``regular-tree`` (``degree``-regular, default 3). The
    exhaustion is ``W_i = ball(i)`` for ``i = 1..radius``.
    """
    name, deg = parse_infinite_family(family)
    if degree is not None:
        deg = int(degree)
    if int(radius) != radius or radius < 1:
        raise InvalidArgument(f"radius must be a positive integer, got {radius!r}")
    radius = int(radius)
    if name == "integer-line":
        root, nb = "0", lambda x: (str(int(x) - 1), str(int(x) + 1))
    elif name == "half-line":
        root, nb = "0", lambda x: tuple(str(v) for v in (int(x) - 1, int(x) + 1) if v >= 0)
    elif name == "lattice":
        def nb(x):
            i, j = map(int, x.split(","))
            return (f"{i-1},{j}", f"{i+1},{j}", f"{i},{j-1}", f"{i},{j+1}")
        root = "0,0"
    else:
        if deg < 2:
            raise InvalidArgument("regular tree needs degree >= 2")

        def nb(x):
            parts = x.split(".")
            kids = tuple(f"{x}.{c}" for c in range(deg if x == "r" else deg - 1))
            return kids if x == "r" else (".".join(parts[:-1]),) + kids
        root = "r"
    g, balls = _ball_graph(root, nb, radius)
    label = f"{name}({deg})" if name == "regular-tree" else name
    return g, Exhaustion(balls, label)


def truncation_domain(family: str, radius: int) -> Domain:
    """Domain ``W_radius`` of an infinite family, inside the ball of radius + 1.

    The extra ring supplies the vertex boundary of ``W_radius``.
    """
    if int(radius) != radius or radius < 1:
        raise InvalidArgument(f"radius must be a positive integer, got {radius!r}")
    g, ex = truncate(family, int(radius) + 1)
    return build_domain(g, ex[int(radius) - 1])


# --------------------------------------------------------------------------
# file format


def save_graph(g: WeightedGraph, path) -> None:
    lines = ["pgraph v1"]
    lines += [f"v {x} {mx!r}" for x, mx in g.measure.items()]
    lines += [f"e {x} {y} {w!r}" for x, y, w in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def _num(tok, path, lineno, field):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", path, lineno, field) from None


def load_graph(path) -> WeightedGraph:
    text = Path(path).read_text().splitlines()
    meas, wts = {}, {}
    header_seen = False
    for lineno, raw in enumerate(text, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line.split() != ["pgraph", "v1"]:
                raise ParseError("missing 'pgraph v1' header", path, lineno)
            header_seen = True
            continue
        tok = line.split()
        if tok[0] == "v":
            if len(tok) != 3:
                raise ParseError("vertex record needs 'v <id> <measure>'", path, lineno)
            if tok[1] in meas:
                raise ValidationError(f"{path}: line {lineno}: duplicate vertex {tok[1]!r}")
            meas[tok[1]] = _num(tok[2], path, lineno, 3)
        elif tok[0] == "e":
            if len(tok) != 4:
                raise ParseError("edge record needs 'e <id1> <id2> <weight>'", path, lineno)
            key = _edge_key(tok[1], tok[2])
            if key in wts:
                raise ValidationError(f"{path}: line {lineno}: duplicate edge {key}")
            wts[key] = _num(tok[3], path, lineno, 4)
        else:
            raise ParseError(f"unknown record type {tok[0]!r}", path, lineno, 1)
    if not header_seen:
        raise ParseError("missing 'pgraph v1' header", path, 1)
    return WeightedGraph(meas, wts)


def save_domain(omega: Iterable[str], path) -> None:
    Path(path).write_text("".join(f"{x}\n" for x in sorted(omega)))


def load_domain(path) -> frozenset:
    ids = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if len(line.split()) != 1:
            raise ParseError("expected one vertex id per line", path, lineno)
        ids.append(line)
    return frozenset(ids)
