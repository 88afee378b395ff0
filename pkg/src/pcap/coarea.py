"""Discrete coarea inequality: level-set capacities against the p-energy.

For a potential ``f`` on the closure and ``a > 1`` the integral
``int_0^inf Cap_p(M_{at}, complement of M_t) d(t^p)``, with
``M_t = {|f| >= t}``, is bounded by ``C(a, p) E_p(f)``. The integrand is
piecewise constant, so the integral is evaluated exactly with one capacity
solve per interval between breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .capacity import MAXIT, TOL, capacity
from .energy import check_p, p_energy
from .errors import ConvergenceError, InvalidArgument, PreconditionError
from .graph import Domain
from .kernels import get_kernels

__all__ = [
    "CoareaCheck",
    "coarea_constant",
    "c_p",
    "level_set",
    "coarea_integral",
    "lemma31_check",
    "lemma31_ratio",
    "random_potentials",
]

SLACK_TOL = 1e-9


def _check_a(a) -> float:
    try:
        a = float(a)
    except (TypeError, ValueError):
        raise InvalidArgument(f"a must be a real number, got {a!r}") from None
    if not a > 1.0 or not math.isfinite(a):
        raise InvalidArgument(f"need a > 1, got {a!r}")
    return a


def coarea_constant(a, p) -> float:
    """C(a, p) = 2 p ln(a) / (a - 1)^p + 2 (a^(p/(p-1)) - 1)^(1-p)."""
    a = _check_a(a)
    p = check_p(p)
    return 2.0 * p * math.log(a) / (a - 1.0) ** p + 2.0 * (a ** (p / (p - 1.0)) - 1.0) ** (1.0 - p)


def c_p(p) -> float:
    """C_p = p ln 4 + (2 - 2^(1/(1-p)))^(1-p); equals C(2, p)."""
    p = check_p(p)
    return p * math.log(4.0) + (2.0 - 2.0 ** (1.0 / (1.0 - p))) ** (1.0 - p)


def level_set(f, t, d: Domain | None = None) -> frozenset:
    """``{x : |f(x)| >= t}``; ``f`` is a mapping, or an array with its domain ``d``."""
    t = float(t)
    if not t >= 0.0:
        raise InvalidArgument(f"level must be nonnegative, got {t!r}")
    if isinstance(f, Mapping):
        return frozenset(x for x, v in f.items() if abs(v) >= t)
    if d is None:
        raise InvalidArgument("array potentials need their domain")
    arr = d.as_array(f)
    return d.subset(np.abs(arr) >= t)


@dataclass(frozen=True)
class CoareaCheck:
    """Both sides of the coarea inequality for one potential."""

    integral: float
    energy: float
    constant: float
    slack: float
    solves: int = 0

    @property
    def holds(self) -> bool:
        return self.slack >= -SLACK_TOL * (1.0 + self.energy)


def _locate_failure(d, absf, a, p, pts, backend, tol, maxit):
    for t0, t1 in zip(pts[:-1], pts[1:]):
        tm = 0.5 * (t0 + t1)
        big = d.subset(absf >= a * tm)
        small = d.subset(absf < tm)
        try:
            capacity(d, big, small, p, backend=backend, tol=tol, maxit=maxit)
        except ConvergenceError as exc:
            raise ConvergenceError(f"coarea integrand on [{t0:.6g}, {t1:.6g}]: {exc}",
                                   best=exc.best, residual=exc.residual) from exc


def coarea_integral(d: Domain, f, a, p, *, extra_breakpoints=(), backend=None, tol=TOL,
                    maxit=MAXIT) -> CoareaCheck:
    """Exact piecewise integral of level-set capacities against ``C(a, p) E_p(f)``.

    ``extra_breakpoints`` adds spurious subdivision points; the value does not
    change, which the tests use to check exactness.
    """
    a = _check_a(a)
    p = check_p(p)
    arr = d.as_array(f)
    absf = np.abs(arr)
    extra = np.asarray(sorted(float(x) for x in extra_breakpoints if x > 0), dtype=np.float64)
    K = get_kernels(backend)
    total, solves, res, _ = K.coarea_integral(d.eu, d.ev, d.ew, d.m, absf, a, p, extra, tol, maxit)
    if res > tol:
        pts = np.unique(np.concatenate(([0.0], absf, absf / a, extra)))
        _locate_failure(d, absf, a, p, pts, backend, tol, maxit)
        raise ConvergenceError("coarea integrand: capacity solve did not converge", residual=res)
    energy = p_energy(d, arr, p)
    const = coarea_constant(a, p)
    return CoareaCheck(float(total), energy, const, const * energy - float(total), int(solves))


def lemma31_check(u, v, a, p):
    """Scalar inequality ``u^p/a^p - v^p <= (u - v)^p / (a^(p/(p-1)) - 1)^(p-1)``.

    Requires ``u >= a v >= 0``; returns ``(lhs, rhs, holds)``.
    """
    a = _check_a(a)
    p = check_p(p)
    u, v = float(u), float(v)
    if u < 0 or v < 0:
        raise PreconditionError("u and v must be nonnegative")
    if u < a * v:
        raise PreconditionError(f"need u >= a v, got u={u!r}, a v={a * v!r}")
    lhs = u ** p / a ** p - v ** p
    rhs = (u - v) ** p / (a ** (p / (p - 1.0)) - 1.0) ** (p - 1.0)
    return lhs, rhs, bool(lhs <= rhs + 1e-12)


def lemma31_ratio(t, a, p) -> float:
    """lhs / rhs of :func:`lemma31_check` at ``v = 1``, ``u = t``; at most 1, and 1 at ``t = a^(p/(p-1))``."""
    lhs, rhs, _ = lemma31_check(t, 1.0, a, p)
    return lhs / rhs


def random_potentials(d: Domain, count: int, seed: int = 0):
    """``count`` seeded random potentials on the closure.

    Entries are standard normal; every fourth potential has a random
    subset zeroed so that level sets include flat regions.
    """
    rng = np.random.default_rng(seed)
    for j in range(int(count)):
        f = rng.standard_normal(d.n)
        if j % 4 == 3:
            f[rng.random(d.n) < 0.4] = 0.0
        yield d.as_dict(f)
