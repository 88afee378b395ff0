"""p-energy, p-Laplacian, outward normal derivative, norms and the p-mean.

Potentials are mappings ``vertex -> value`` over the closure of a domain or
arrays in closure order (see :meth:`pcap.graph.Domain.as_array`). Every sum
runs over the edges of the boundary graph, each unordered edge once.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgument
from .graph import Domain

__all__ = [
    "check_p",
    "phi",
    "p_energy",
    "mixed_energy",
    "p_laplacian",
    "laplacian_all",
    "normal_derivative",
    "green_residual",
    "lp_norm",
    "linf_norm",
    "p_mean",
    "weighted_p_mean",
]


def check_p(p) -> float:
    """Validate an exponent: finite and strictly greater than 1."""
    try:
        q = float(p)
    except (TypeError, ValueError):
        raise InvalidArgument(f"exponent must be a real number, got {p!r}") from None
    if not math.isfinite(q) or q <= 1.0:
        raise InvalidArgument(f"exponent out of range: need 1 < p < inf, got {p!r}")
    return q


def phi(t, p):
    """|t|^(p-2) t, taken as 0 at t = 0."""
    t = np.asarray(t, dtype=np.float64)
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def _edge_diff(d: Domain, f):
    return f[d.ev] - f[d.eu]


def p_energy(d: Domain, f, p) -> float:
    p = check_p(p)
    f = d.as_array(f)
    return float(np.sum(d.ew * np.abs(_edge_diff(d, f)) ** p))


def mixed_energy(d: Domain, f, g, p) -> float:
    """Sum over edges of w phi(df) dg; the nonlinear weight comes from ``f``."""
    p = check_p(p)
    f, g = d.as_array(f), d.as_array(g)
    return float(np.sum(d.ew * phi(_edge_diff(d, f), p) * _edge_diff(d, g)))


def laplacian_all(d: Domain, f, p) -> np.ndarray:
    """Delta_p f at every closure vertex, computed in the boundary graph."""
    p = check_p(p)
    f = d.as_array(f)
    flow = d.ew * phi(_edge_diff(d, f), p)  # flow into eu from ev
    out = np.bincount(d.eu, weights=flow, minlength=d.n) - np.bincount(d.ev, weights=flow, minlength=d.n)
    return out / d.m


def p_laplacian(d: Domain, f, p, x) -> float:
    if x not in d.omega:
        raise InvalidArgument(f"vertex {x!r} is not in omega")
    return float(laplacian_all(d, f, p)[d.index[x]])


def normal_derivative(d: Domain, f, p, z) -> float:
    """Outward p-normal derivative at a boundary vertex ``z``."""
    if z not in d.boundary:
        raise InvalidArgument(f"vertex {z!r} is not a boundary vertex")
    p = check_p(p)
    f = d.as_array(f)
    bg = d.boundary_graph
    fz = f[d.index[z]]
    total = sum(bg.weight(x, z) * float(phi(fz - f[d.index[x]], p)) for x in bg.neighbors(z))
    return total / bg.m(z)


def green_residual(d: Domain, f, g, p) -> float:
    """Absolute defect of the discrete Green formula for (f, g)."""
    p = check_p(p)
    f, g = d.as_array(f), d.as_array(g)
    lap = laplacian_all(d, f, p)
    inner = -float(np.sum((d.m * lap * g)[d.interior]))
    # on the boundary the normal derivative is -Delta_p in the boundary graph
    outer = -float(np.sum((d.m * lap * g)[d.boundary_mask]))
    return abs(inner + outer - mixed_energy(d, f, g, p))


def _over_mask(d: Domain, over):
    if over is None:
        return np.ones(d.n, dtype=bool)
    return d.mask(over)


def lp_norm(d: Domain, f, p, over=None) -> float:
    p = check_p(p)
    f = d.as_array(f)
    sel = _over_mask(d, over)
    return float(np.sum(d.m[sel] * np.abs(f[sel]) ** p)) ** (1.0 / p)


def linf_norm(d: Domain, f, over=None) -> float:
    f = d.as_array(f)
    sel = _over_mask(d, over)
    return float(np.max(np.abs(f[sel]))) if sel.any() else 0.0


def weighted_p_mean(values, mass, p, tol=1e-13) -> float:
    """Minimizer of c -> sum mass |values - c|^p; zero masses are ignored.

    Newton on the derivative, safeguarded by bisection on [min, max] and
    stopped when the bracket is narrower than ``tol (1 + max |values|)``.
    """
    p = check_p(p)
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(mass, dtype=np.float64)
    if not (w > 0).any():
        raise InvalidArgument("p-mean over an empty set")
    if p == 2.0:
        return float(np.sum(w * v) / np.sum(w))
    keep = w > 0
    v, w = v[keep], w[keep]
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return lo
    width = tol * (1.0 + max(abs(lo), abs(hi)))
    c = float(np.sum(w * v) / np.sum(w))
    last = hi - lo
    for k in range(400):
        r = c - v
        g = float(np.sum(w * phi(r, p)))
        if g > 0:
            hi = c
        elif g < 0:
            lo = c
        else:
            break
        if hi - lo <= width:
            break
        h = (p - 1.0) * float(np.sum(w * np.maximum(np.abs(r), 1e-300) ** (p - 2.0)))
        cn = c - g / h if np.isfinite(h) and h > 0 else 0.5 * (lo + hi)
        # bisect when Newton leaves the bracket or stops shrinking it
        if not lo < cn < hi or (k % 2 == 1 and hi - lo > 0.5 * last):
            cn = 0.5 * (lo + hi)
        if k % 2 == 1:
            last = hi - lo
        c = cn
    return c


def p_mean(d: Domain, f, p, over=None) -> float:
    """The constant c minimizing the p-norm of f - c over ``over`` (default: closure)."""
    f = d.as_array(f)
    sel = _over_mask(d, over)
    if not sel.any():
        raise InvalidArgument("p-mean over an empty set")
    return weighted_p_mean(f, np.where(sel, d.m, 0.0), p)
