"""p-capacity of condenser pairs, p-harmonic extensions and exhaustion limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import check_p
from .errors import ConvergenceError, InvalidArgument
from .graph import Domain, truncation_domain
from .kernels import get_kernels

__all__ = [
    "CapacityResult",
    "LimitSequence",
    "capacity",
    "capacity_to_boundary",
    "harmonic_extension",
    "capacity_linear",
    "capacity_infinite",
    "TOL",
    "MAXIT",
]

TOL = 1e-8
MAXIT = 10_000
RANGE_SLACK = 1e-10


def ill_conditioned(p: float) -> bool:
    return p < 1.1 or p > 8.0


@dataclass(frozen=True)
class CapacityResult:
    """Capacity value with its equilibrium potential and solver diagnostics.

    ``value`` is ``math.inf`` for intersecting pairs and 0 when either set is
    empty; ``potential`` is None in those cases.
    """

    value: float
    potential: dict | None
    iterations: int = 0
    residual: float = 0.0
    continued: bool = False
    ill_conditioned: bool = False
    backend: str = ""

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class LimitSequence:
    """Values along an exhaustion, with monotonicity and the last gap."""

    pairs: tuple
    monotone: bool | None = None
    last_gap: float = math.nan
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    @property
    def values(self) -> list:
        return [v for _, v in self.pairs]


def _solve(d: Domain, fixed, vals, p, backend, tol, maxit, what):
    K = get_kernels(backend)
    base, corr, it, res, st, cont = K.solve_pinned(d.eu, d.ev, d.ew, d.m, fixed, vals, p, tol, maxit)
    value = float(K.energy(corr, d.eu, d.ev, d.ew, p, K.edge_offsets(d.eu, d.ev, base)))
    f = base + corr
    if not res <= tol:
        raise ConvergenceError(f"{what}: p-harmonic solve did not converge", best=d.as_dict(f),
                               residual=float(res), value=value)
    return f, int(it), float(res), bool(cont), K.backend, value


def capacity(d: Domain, a, b, p, *, backend=None, tol=TOL, maxit=MAXIT) -> CapacityResult:
    """Minimum p-energy over potentials equal to 1 on ``a`` and 0 on ``b``."""
    p = check_p(p)
    ma, mb = d.mask(a), d.mask(b)
    flag = ill_conditioned(p)
    if (ma & mb).any():
        return CapacityResult(math.inf, None, ill_conditioned=flag)
    if not ma.any() or not mb.any():
        return CapacityResult(0.0, None, ill_conditioned=flag)
    f, it, res, cont, be, value = _solve(d, ma | mb, ma.astype(np.float64), p, backend, tol, maxit,
                                         "capacity")
    # maximum principle: the minimizer lies in [0, 1]
    if f.min() < -RANGE_SLACK or f.max() > 1.0 + RANGE_SLACK:
        raise ConvergenceError("equilibrium potential left [0, 1]", best=d.as_dict(f), residual=res)
    f = np.clip(f, 0.0, 1.0)
    return CapacityResult(value, d.as_dict(f), it, res, cont, flag, be)


def capacity_to_boundary(d: Domain, a, p, **kw) -> CapacityResult:
    a = frozenset((a,) if isinstance(a, str) else a)
    if not a <= d.omega:
        raise InvalidArgument("set must lie inside omega")
    return capacity(d, a, d.boundary, p, **kw)


def harmonic_extension(d: Domain, data, p, *, backend=None, tol=TOL, maxit=MAXIT) -> CapacityResult:
    """p-harmonic function with the prescribed values ``data`` (vertex -> value).

    Vertices without data are free; ``value`` is the energy of the result.
    """
    p = check_p(p)
    fixed = d.mask(list(data))
    vals = np.zeros(d.n)
    for x, v in data.items():
        vals[d.index[x]] = float(v)
    f, it, res, cont, be, value = _solve(d, fixed, vals, p, backend, tol, maxit, "extension")
    return CapacityResult(value, d.as_dict(f), it, res, cont, ill_conditioned(p), be)


def capacity_linear(d: Domain, a, b) -> float:
    """p = 2 capacity from a dense linear solve (independent oracle).

    Built straight from the boundary graph's weight table.
    """
    bg = d.boundary_graph
    a = frozenset((a,) if isinstance(a, str) else a)
    b = frozenset((b,) if isinstance(b, str) else b)
    if a & b:
        return math.inf
    if not a or not b:
        return 0.0
    verts = sorted(bg.vertices)
    pos = {x: i for i, x in enumerate(verts)}
    L = np.zeros((len(verts), len(verts)))
    for (x, y), w in bg.weights.items():
        i, j = pos[x], pos[y]
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    u = np.zeros(len(verts))
    for x in a:
        u[pos[x]] = 1.0
    free = [pos[x] for x in verts if x not in a and x not in b]
    if free:
        pinned = [i for i in range(len(verts)) if i not in set(free)]
        rhs = -L[np.ix_(free, pinned)] @ u[pinned]
        # least squares: components cut off from a and b get 0
        u[free] = np.linalg.lstsq(L[np.ix_(free, free)], rhs, rcond=None)[0]
    return float(u @ L @ u)


def capacity_infinite(family: str, a, p, radii, **kw) -> LimitSequence:
    """``Cap(a, boundary of W_r)`` for each radius ``r`` of the exhaustion.

    ``W_r`` is the ball of radius ``r``; its vertex boundary is the sphere of
    radius ``r + 1``. The sequence is non-increasing in theory; ``monotone``
    reports it with slack 1e-10.
    """
    a = frozenset((a,) if isinstance(a, str) else a)
    out = []
    for r in sorted(radii):
        d = truncation_domain(family, r)
        if not a <= d.omega:
            raise InvalidArgument(f"set not contained in W_{r}")
        out.append((r, capacity(d, a, d.boundary, p, **kw).value))
    vals = [v for _, v in out]
    mono = all(y <= x + 1e-10 for x, y in zip(vals, vals[1:]))
    gap = abs(vals[-1] - vals[-2]) if len(vals) > 1 else math.nan
    return LimitSequence(tuple(out), mono, gap)
