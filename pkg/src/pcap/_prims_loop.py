"""Loop-style primitives; compiled with numba by :mod:`pcap.kernels`.

Edge differences are ``f[ev] - f[eu] + off``. The offset lets a potential be
held as a fixed base (folded into ``off``) plus a small correction ``f``,
which keeps near-equal neighbours at full relative precision.
"""
import numpy as np

__all__ = ["phi", "phi_vec", "energy", "flux", "hessian"]


def phi(t, p):
    if t > 0.0:
        return t ** (p - 1.0)
    if t < 0.0:
        return -((-t) ** (p - 1.0))
    return 0.0


def phi_vec(x, p):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = phi(x[i], p)
    return out


def energy(f, eu, ev, ew, p, off):
    s = 0.0
    for k in range(eu.shape[0]):
        s += ew[k] * abs(f[ev[k]] - f[eu[k]] + off[k]) ** p
    return s


def flux(f, eu, ev, ew, p, off):
    # F[i] = sum_j w_ij phi(f_j - f_i); Laplacian is F / m
    out = np.zeros(f.shape[0])
    for k in range(eu.shape[0]):
        i = eu[k]
        j = ev[k]
        q = ew[k] * phi(f[j] - f[i] + off[k], p)
        out[i] += q
        out[j] -= q
    return out


def hessian(f, eu, ev, ew, p, free, off, floor):
    # Hessian of E/p restricted to the ``free`` index list
    n = f.shape[0]
    pos = np.full(n, -1, dtype=np.int64)
    for a in range(free.shape[0]):
        pos[free[a]] = a
    nf = free.shape[0]
    H = np.zeros((nf, nf))
    for k in range(eu.shape[0]):
        i = eu[k]
        j = ev[k]
        d = abs(f[j] - f[i] + off[k])
        if p < 2.0 and d < floor:
            d = floor
        c = (p - 1.0) * ew[k] * d ** (p - 2.0)
        a = pos[i]
        b = pos[j]
        if a >= 0:
            H[a, a] += c
        if b >= 0:
            H[b, b] += c
        if a >= 0 and b >= 0:
            H[a, b] -= c
            H[b, a] -= c
    return H
