"""Vectorized numpy primitives for the pure-numpy backend."""
import numpy as np

__all__ = ["phi_vec", "energy", "flux", "hessian"]


def phi_vec(x, p):
    return np.sign(x) * np.abs(x) ** (p - 1.0)


def energy(f, eu, ev, ew, p, off):
    return float(np.dot(ew, np.abs(f[ev] - f[eu] + off) ** p))


def flux(f, eu, ev, ew, p, off):
    n = f.shape[0]
    q = ew * phi_vec(f[ev] - f[eu] + off, p)
    return np.bincount(eu, q, n) - np.bincount(ev, q, n)


def hessian(f, eu, ev, ew, p, free, off, floor):
    n = f.shape[0]
    d = np.abs(f[ev] - f[eu] + off)
    if p < 2.0:
        d = np.maximum(d, floor)
    c = (p - 1.0) * ew * d ** (p - 2.0)
    idx = np.concatenate((eu * n + eu, ev * n + ev, eu * n + ev, ev * n + eu))
    H = np.bincount(idx, np.concatenate((c, c, -c, -c)), n * n).reshape(n, n)
    return H[np.ix_(free, free)]
