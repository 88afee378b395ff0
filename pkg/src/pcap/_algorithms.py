"""Algorithm bodies shared by both kernel backends.

The primitives ``phi_vec``, ``energy``, ``flux`` and ``hessian`` are module
globals bound by :func:`pcap.kernels.get_kernels`; under numba every function
here is rebound to its compiled dispatcher before first use.
"""
import numpy as np

OK, MAXITER, STALLED = 0, 1, 2
T_FLOOR = 1e-10
REFINE_FLOOR = 1e-30
SNAP_TOL = 1e-11
STALL_AFTER = 25

phi_vec = energy = flux = hessian = None  # bound per backend

__all__ = ['p_mean', 'snap', 'free_index', 'residual', 'objective', 'objective_change', 'newton_direction', 'graded_direction', 'newton_min', 'attach_isolated', 'linear_start', 'refine', 'smooth_terms', 'smooth_newton', 'contract_solve', 'solve_pinned', 'edge_offsets', 'capacity_value', 'pair_capacities', 'dirichlet_capacities', 'coarea_integral', 'denominator', 'quotient', 'normalize', 'inverse_power', 'eigen_residual', 'polish', 'contract_polish', 'route_offsets', 'rayleigh_solve']


def p_mean(vals, mass, p, tol):
    """Minimizer of c -> sum mass |vals - c|^p (mass may contain zeros).

    Newton safeguarded by bisection, stopped on the bracket width
    ``tol (1 + max |vals|)``; Newton steps that fail to halve the bracket
    within two iterations are replaced by bisection. ``tol <= 0`` runs to
    adjacent floats, which matters for p < 2 when the mean sits next to a
    data value: there phi_p magnifies an absolute error e to e^(p-1).
    """
    lo = np.inf
    hi = -np.inf
    tot = 0.0
    for i in range(vals.shape[0]):
        if mass[i] > 0.0:
            tot += mass[i]
            if vals[i] < lo:
                lo = vals[i]
            if vals[i] > hi:
                hi = vals[i]
    if tot == 0.0:
        return 0.0
    if p == 2.0:
        return float(np.sum(mass * vals) / tot)
    if hi - lo <= 0.0:
        return lo
    width = tol * (1.0 + max(abs(lo), abs(hi)))
    c = float(np.sum(mass * vals) / tot)
    last = hi - lo
    for k in range(2400):
        r = c - vals
        g = float(np.sum(mass * phi_vec(r, p)))
        if g > 0.0:
            hi = c
        elif g < 0.0:
            lo = c
        else:
            return c
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break
        a = np.abs(r)
        if p < 2.0:
            a = np.maximum(a, 1e-300)
        h = (p - 1.0) * float(np.sum(mass * a ** (p - 2.0)))
        cn = c - g / h if h > 0.0 and np.isfinite(h) else 0.5 * (lo + hi)
        if not (lo < cn < hi) or (k % 2 == 1 and hi - lo > 0.5 * last):
            cn = 0.5 * (lo + hi)
        if k % 2 == 1:
            last = hi - lo
        c = cn
    return c


def snap(f, eu, ev, fixed, anchor_zero, tol):
    """Merge free values that agree to ``tol`` (relative to the spread).

    A cluster touching a pinned vertex takes the pinned value; with
    ``anchor_zero`` near-zero free values become exactly 0.
    """
    n = f.shape[0]
    scale = 1.0
    for i in range(n):
        if abs(f[i]) > scale:
            scale = abs(f[i])
    thr = tol * scale
    parent = np.arange(n)
    for k in range(eu.shape[0]):
        if abs(f[eu[k]] - f[ev[k]]) <= thr:
            a = eu[k]
            while parent[a] != a:
                a = parent[a]
            b = ev[k]
            while parent[b] != b:
                b = parent[b]
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    root = np.empty(n, dtype=np.int64)
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        root[i] = a
    total = np.zeros(n)
    count = np.zeros(n)
    pinned = np.zeros(n, dtype=np.bool_)
    pinval = np.zeros(n)
    for i in range(n):
        r = root[i]
        total[r] += f[i]
        count[r] += 1.0
        if fixed[i]:
            pinned[r] = True
            pinval[r] = f[i]
    g = f.copy()
    for i in range(n):
        if fixed[i]:
            continue
        r = root[i]
        if pinned[r]:
            g[i] = pinval[r]
        else:
            g[i] = total[r] / count[r]
        if anchor_zero and abs(g[i]) <= thr:
            g[i] = 0.0
    return g


def free_index(fixed):
    return np.nonzero(~fixed)[0]


def residual(f, eu, ev, ew, m, fixed, s, p, off):
    F = flux(f, eu, ev, ew, p, off)
    r = 0.0
    for i in range(f.shape[0]):
        if not fixed[i]:
            v = abs(F[i] + s[i]) / m[i]
            if v > r:
                r = v
    return r


def objective(f, eu, ev, ew, s, p, off):
    return energy(f, eu, ev, ew, p, off) / p - float(np.dot(s, f))


def objective_change(f, step, eu, ev, ew, s, p, off):
    """J(f + step) - J(f) for J = E/p - <s, f>, accurate at any scale.

    Each edge term ``|t + h|^p - |t|^p`` is formed as
    ``|t|^p expm1(p log1p(h / t))`` when ``|h| < |t|/2``, so changes far
    below the rounding level of ``J`` itself are still resolved.
    """
    t = f[ev] - f[eu] + off
    h = step[ev] - step[eu]
    tot = 0.0
    for k in range(t.shape[0]):
        tk = t[k]
        hk = h[k]
        if hk == 0.0:
            continue
        if abs(hk) < 0.5 * abs(tk):
            dk = abs(tk) ** p * np.expm1(p * np.log1p(hk / tk))
        else:
            dk = abs(tk + hk) ** p - abs(tk) ** p
        tot += ew[k] * dk
    return tot / p - float(np.dot(s, step))


def newton_direction(H, g):
    """Solve H d = -g; diagonally scaled gradient if H is singular."""
    try:
        d = np.linalg.solve(H, -g)
    except Exception:
        d = np.empty(g.shape[0])
        for a in range(g.shape[0]):
            d[a] = -g[a] / H[a, a] if H[a, a] > 0.0 else -g[a]
    ok = True
    for a in range(d.shape[0]):
        if not np.isfinite(d[a]):
            ok = False
    if not ok:
        for a in range(g.shape[0]):
            d[a] = -g[a] / H[a, a] if H[a, a] > 0.0 else -g[a]
    return d


def graded_direction(f, eu, ev, ew, p, fixed, free, off, floor, g):
    """Newton direction solving H d = -g in a basis adapted to stiff edges.

    For p < 2 an edge with a tiny difference has curvature many orders above
    the rest, and a plain LU solve then loses the other components. Vertices
    joined by stiff edges (curvature above 1e6 times the median) share a
    root variable and carry their own offset from it; every edge term is
    assembled straight in that basis, so no large terms cancel.
    """
    n = f.shape[0]
    nf = free.shape[0]
    ne = eu.shape[0]
    t = np.abs(f[ev] - f[eu] + off)
    if p < 2.0:
        t = np.maximum(t, floor)
    c = (p - 1.0) * ew * t ** (p - 2.0)
    parent = np.arange(n)
    if p < 2.0 and ne > 0:
        cut = 1e6 * np.median(c)
        for k in range(ne):
            if c[k] <= cut:
                continue
            a = eu[k]
            while parent[a] != a:
                a = parent[a]
            b = ev[k]
            while parent[b] != b:
                b = parent[b]
            if a == b or (fixed[a] and fixed[b]):
                continue
            if fixed[b] or (not fixed[a] and b < a):
                parent[a] = b
            else:
                parent[b] = a
    root = np.empty(n, dtype=np.int64)
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        root[i] = a
    pos = np.full(n, -1, dtype=np.int64)
    for a in range(nf):
        pos[free[a]] = a
    # the variable of vertex i is pos[i]; a non-root also moves with its free root
    up = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if pos[i] >= 0 and root[i] != i and not fixed[root[i]]:
            up[i] = pos[root[i]]
    H = np.zeros((nf, nf))
    idx = np.empty(4, dtype=np.int64)
    sg = np.empty(4)
    for k in range(ne):
        cnt = 0
        for side in range(2):
            v = ev[k] if side == 0 else eu[k]
            sgn = 1.0 if side == 0 else -1.0
            if pos[v] >= 0:
                idx[cnt] = pos[v]
                sg[cnt] = sgn
                cnt += 1
            if up[v] >= 0:
                idx[cnt] = up[v]
                sg[cnt] = sgn
                cnt += 1
        # cancel variables shared by both ends (same free root)
        for x in range(cnt):
            for y in range(x + 1, cnt):
                if idx[x] == idx[y] and sg[x] != 0.0 and sg[y] != 0.0 and sg[x] == -sg[y]:
                    sg[x] = 0.0
                    sg[y] = 0.0
        for x in range(cnt):
            if sg[x] == 0.0:
                continue
            for y in range(cnt):
                if sg[y] != 0.0:
                    H[idx[x], idx[y]] += c[k] * sg[x] * sg[y]
    gz = g.copy()
    for i in range(n):
        if up[i] >= 0:
            gz[up[i]] += g[pos[i]]
    dmax = 0.0
    for a in range(nf):
        if H[a, a] > dmax:
            dmax = H[a, a]
    reg = 1e-300
    if p > 2.0:
        reg += 1e-13 * dmax
    for a in range(nf):
        H[a, a] += reg
    dz = newton_direction(H, gz)
    d = dz.copy()
    for i in range(n):
        if up[i] >= 0:
            d[pos[i]] += dz[up[i]]
    return d


def newton_min(eu, ev, ew, m, fixed, f0, s, p, tol, maxit, off, floor):
    """Minimize E(f)/p - <s, f> over the free entries of ``f0``.

    Damped Newton: the full step is taken when it halves the residual,
    otherwise Armijo backtracking (factor 0.5, first step 1), and when the
    objective is flat to rounding, backtracking on the residual. For p < 2
    the curvature of an edge uses ``max(|df|, floor)``, and with zero
    offsets near-equal neighbours are snapped together when that meets the
    tolerance. Stops as stalled after 25 steps without a new best residual.
    Returns ``(f, iterations, residual, status)``; the residual is
    ``max |Delta_p f + s/m|`` over free vertices.
    """
    free = free_index(fixed)
    f = f0.copy()
    if free.shape[0] == 0:
        return f, 0, 0.0, OK
    nf = free.shape[0]
    plain = True
    for k in range(off.shape[0]):
        if off[k] != 0.0:
            plain = False
            break
    it = 0
    best = np.inf
    since = 0
    while it < maxit:
        F = flux(f, eu, ev, ew, p, off)
        g = np.empty(nf)
        res = 0.0
        for a in range(nf):
            i = free[a]
            g[a] = -(F[i] + s[i])
            v = abs(g[a]) / m[i]
            if v > res:
                res = v
        if res <= tol:
            return f, it, res, OK
        if res < best:
            best = res
            since = 0
        else:
            since += 1
            if since > STALL_AFTER:
                return f, it, res, STALLED
        if p < 2.0 and plain:
            fs = snap(f, eu, ev, fixed, False, SNAP_TOL)
            rs = residual(fs, eu, ev, ew, m, fixed, s, p, off)
            if rs <= tol:
                return fs, it, rs, OK
        d = graded_direction(f, eu, ev, ew, p, fixed, free, off, floor, g)
        slope = float(np.dot(g, d))
        if not slope < 0.0:
            d = -g
            slope = float(np.dot(g, d))
        ft = f.copy()
        for a in range(nf):
            ft[free[a]] = f[free[a]] + d[a]
        if residual(ft, eu, ev, ew, m, fixed, s, p, off) <= 0.5 * res:
            # Newton region: objective changes are at rounding level here
            f = ft
            it += 1
            continue
        alpha = 1.0
        accepted = False
        step = np.zeros(f.shape[0])
        for _ in range(60):
            for a in range(nf):
                step[free[a]] = alpha * d[a]
                ft[free[a]] = f[free[a]] + alpha * d[a]
            if objective_change(f, step, eu, ev, ew, s, p, off) <= 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # objective flat to rounding: backtrack on the residual instead
            alpha = 1.0
            for _ in range(60):
                for a in range(nf):
                    ft[free[a]] = f[free[a]] + alpha * d[a]
                if residual(ft, eu, ev, ew, m, fixed, s, p, off) < res:
                    accepted = True
                    break
                alpha *= 0.5
        if not accepted:
            return f, it, res, STALLED
        f = ft
        it += 1
    return f, it, residual(f, eu, ev, ew, m, fixed, s, p, off), MAXITER


def attach_isolated(eu, ev, fixed, vals):
    """Pin free vertices with no path to a pinned vertex at 0."""
    n = fixed.shape[0]
    reach = fixed.copy()
    changed = True
    while changed:
        changed = False
        for k in range(eu.shape[0]):
            a = eu[k]
            b = ev[k]
            if reach[a] != reach[b]:
                reach[a] = True
                reach[b] = True
                changed = True
    fx = fixed.copy()
    v = vals.copy()
    for i in range(n):
        if not reach[i]:
            fx[i] = True
            v[i] = 0.0
    return fx, v


def linear_start(eu, ev, ew, fixed, vals, s):
    """Exact minimizer of the p=2 problem (one Newton step)."""
    free = free_index(fixed)
    f = vals.copy()
    for a in range(free.shape[0]):
        f[free[a]] = 0.0
    if free.shape[0] == 0:
        return f
    off = np.zeros(eu.shape[0])
    F = flux(f, eu, ev, ew, 2.0, off)
    g = np.empty(free.shape[0])
    for a in range(free.shape[0]):
        g[a] = -(F[free[a]] + s[free[a]])
    H = hessian(f, eu, ev, ew, 2.0, free, off, T_FLOOR)
    d = np.linalg.solve(H, -g)
    for a in range(free.shape[0]):
        f[free[a]] = d[a]
    return f


def refine(eu, ev, ew, m, fixed, base, p, tol, maxit):
    """Newton on a correction to ``base``, with ``base`` folded into edge offsets.

    Differences of near-equal base values are exact in floating point, so the
    correction resolves edge differences far below the spacing of doubles
    near the base values. Returns ``(base, correction, iterations, residual,
    status)``.
    """
    off = edge_offsets(eu, ev, base)
    zero = np.zeros(base.shape[0])
    c, it, res, st = newton_min(eu, ev, ew, m, fixed, zero, zero, p, tol, maxit, off, REFINE_FLOOR)
    return base, c, it, res, st


def smooth_terms(f, eu, ev, ew, p, eps, off):
    """Energy/p, flux and edge curvature of sum w (df^2 + eps^2)^(p/2)."""
    n = f.shape[0]
    ne = eu.shape[0]
    F = np.zeros(n)
    c = np.empty(ne)
    e = 0.0
    e2 = eps * eps
    for k in range(ne):
        t = f[ev[k]] - f[eu[k]] + off[k]
        q = t * t + e2
        e += ew[k] * q ** (0.5 * p)
        fl = ew[k] * t * q ** (0.5 * p - 1.0)
        F[eu[k]] += fl
        F[ev[k]] -= fl
        c[k] = ew[k] * q ** (0.5 * p - 2.0) * ((p - 1.0) * t * t + e2)
    return e / p, F, c


def smooth_newton(eu, ev, ew, m, fixed, f0, p, eps, tol, maxit):
    """Damped Newton for the regularized energy sum w (df^2 + eps^2)^(p/2).

    The regularized problem is smooth and strictly convex along edges, so
    Newton with Armijo backtracking converges from anywhere; used to walk
    towards the p < 2 minimizer as ``eps`` decreases.
    """
    free = free_index(fixed)
    nf = free.shape[0]
    f = f0.copy()
    n = f.shape[0]
    if nf == 0:
        return f
    off = np.zeros(eu.shape[0])
    pos = np.full(n, -1, dtype=np.int64)
    for a in range(nf):
        pos[free[a]] = a
    for _ in range(maxit):
        j0, F, c = smooth_terms(f, eu, ev, ew, p, eps, off)
        g = np.empty(nf)
        res = 0.0
        for a in range(nf):
            g[a] = -F[free[a]]
            v = abs(g[a]) / m[free[a]]
            if v > res:
                res = v
        if res <= tol:
            break
        H = np.zeros((nf, nf))
        for k in range(eu.shape[0]):
            a = pos[eu[k]]
            b = pos[ev[k]]
            if a >= 0:
                H[a, a] += c[k]
            if b >= 0:
                H[b, b] += c[k]
            if a >= 0 and b >= 0:
                H[a, b] -= c[k]
                H[b, a] -= c[k]
        for a in range(nf):
            H[a, a] += 1e-300
        d = newton_direction(H, g)
        slope = float(np.dot(g, d))
        if not slope < 0.0:
            break
        alpha = 1.0
        ft = f.copy()
        ok = False
        for _ in range(60):
            for a in range(nf):
                ft[free[a]] = f[free[a]] + alpha * d[a]
            if smooth_terms(ft, eu, ev, ew, p, eps, off)[0] <= j0 + 1e-4 * alpha * slope:
                ok = True
                break
            alpha *= 0.5
        if not ok:
            break
        f = ft
    return f


def contract_solve(eu, ev, ew, m, fixed, vals, base, corr, p, thr, tol, maxit):
    """Merge neighbours whose values agree to ``thr`` (relative) and re-solve.

    For p < 2 minimizers can be constant on clusters of free vertices, where
    Newton only crawls. The problem restricted to potentials constant on the
    clusters has the same minimizer whenever the clusters are right, so the
    contracted graph is solved (Newton, then offset refinement) and the
    result expanded. Returns ``(base, corr, iterations, residual, status)``
    with the residual measured on the original graph.
    """
    n = base.shape[0]
    f = base + corr
    scale = 1.0
    for i in range(n):
        if abs(f[i]) > scale:
            scale = abs(f[i])
    parent = np.arange(n)
    pinned = fixed.copy()
    pval = vals.copy()
    for k in range(eu.shape[0]):
        a = eu[k]
        b = ev[k]
        diff = (base[b] - base[a]) + (corr[b] - corr[a])
        if abs(diff) > thr * scale:
            continue
        while parent[a] != a:
            a = parent[a]
        while parent[b] != b:
            b = parent[b]
        if a == b:
            continue
        if pinned[a] and pinned[b]:
            continue
        if pinned[b]:
            parent[a] = b
        elif pinned[a]:
            parent[b] = a
        elif a < b:
            parent[b] = a
        else:
            parent[a] = b
    label = np.full(n, -1, dtype=np.int64)
    root = np.empty(n, dtype=np.int64)
    c = 0
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        root[i] = a
        if label[a] < 0:
            label[a] = c
            c += 1
    cm = np.zeros(c)
    cfix = np.zeros(c, dtype=np.bool_)
    cval = np.zeros(c)
    csum = np.zeros(c)
    ccnt = np.zeros(c)
    for i in range(n):
        q = label[root[i]]
        cm[q] += m[i]
        csum[q] += f[i]
        ccnt[q] += 1.0
        if pinned[root[i]]:
            cfix[q] = True
            cval[q] = pval[root[i]]
    ne = 0
    for k in range(eu.shape[0]):
        if label[root[eu[k]]] != label[root[ev[k]]]:
            ne += 1
    cu = np.empty(ne, dtype=np.int64)
    cv = np.empty(ne, dtype=np.int64)
    cw = np.empty(ne)
    j = 0
    for k in range(eu.shape[0]):
        qa = label[root[eu[k]]]
        qb = label[root[ev[k]]]
        if qa != qb:
            cu[j] = qa
            cv[j] = qb
            cw[j] = ew[k]
            j += 1
    start = np.empty(c)
    for q in range(c):
        start[q] = cval[q] if cfix[q] else csum[q] / ccnt[q]
    zc = np.zeros(c)
    g, it, res, st = newton_min(cu, cv, cw, cm, cfix, start, zc, p, tol, maxit, np.zeros(ne), T_FLOOR)
    gb, gc, it2, res2, st2 = refine(cu, cv, cw, cm, cfix, g, p, tol, maxit)
    if res < res2:
        gb = g
        gc = zc
    nb = np.empty(n)
    nc = np.empty(n)
    for i in range(n):
        nb[i] = gb[label[root[i]]]
        nc[i] = gc[label[root[i]]]
    r = residual(nc, eu, ev, ew, m, fixed, np.zeros(n), p, edge_offsets(eu, ev, nb))
    it += it2
    if r > tol:
        # clusters may only be near-flat: reopen them on the original graph
        rb, rc, it3, r3, st3 = refine(eu, ev, ew, m, fixed, nb + nc, p, tol, maxit)
        it += it3
        if r3 < r:
            nb, nc, r = rb, rc, r3
    return nb, nc, it, r, OK if r <= tol else STALLED


def solve_pinned(eu, ev, ew, m, fixed, vals, p, tol, maxit):
    """p-harmonic function with prescribed values on ``fixed``.

    Starts from the p=2 solution and runs Newton. If that stops short of
    ``tol``, the iterate is refined in offset form; for p < 2, clusters of
    Newton is restarted from the minimizer of the smoothed energy
    ``sum w (df^2 + eps^2)^(p/2)`` followed down eps = 1e-1 .. 1e-14, and
    clusters of near-equal neighbours are contracted at thresholds
    1e-3 .. 1e-10. As a last resort Newton is continued over p = 2 (p/2)^(j/4), j = 1..4.
    Returns ``(base, corr, iterations, residual, status, continued)``; the
    solution is ``base + corr``, with edge differences taken as
    ``(base[ev] - base[eu]) + (corr[ev] - corr[eu])``.
    """
    fx, v = attach_isolated(eu, ev, fixed, vals)
    zero = np.zeros(m.shape[0])
    noff = np.zeros(eu.shape[0])
    f = linear_start(eu, ev, ew, fx, v, zero)
    if p == 2.0:
        res = residual(f, eu, ev, ew, m, fx, zero, 2.0, noff)
        if res <= tol:
            return f, zero, 1, res, OK, False
    budget = maxit // 4
    f1, it1, res1, st1 = newton_min(eu, ev, ew, m, fx, f, zero, p, tol, budget, noff, T_FLOOR)
    if st1 == OK:
        return f1, zero, it1, res1, OK, False
    total = it1
    best_b, best_c, best_res, best_st = f1, zero, res1, st1
    bb, bc, itr, resr, str_ = refine(eu, ev, ew, m, fx, f1, p, tol, budget)
    total += itr
    if str_ == OK:
        return bb, bc, total, resr, OK, False
    if resr < best_res:
        best_b, best_c, best_res, best_st = bb, bc, resr, str_
    if p < 2.0:
        # smoothed continuation: minimize sum w (df^2 + eps^2)^(p/2), eps -> 0
        g = f
        for j in range(1, 15):
            g = smooth_newton(eu, ev, ew, m, fx, g, p, 10.0 ** (-j), 0.01 * tol, 200)
        ress = residual(g, eu, ev, ew, m, fx, zero, p, noff)
        gn, itg, resg, stg = newton_min(eu, ev, ew, m, fx, g, zero, p, tol, budget, noff, T_FLOOR)
        total += itg
        if stg == OK:
            return gn, zero, total, resg, OK, True
        if resg < ress:
            g = gn
            ress = resg
        if ress < best_res:
            best_b, best_c, best_res, best_st = g, zero, ress, STALLED
        bb, bc, itr, resr, str_ = refine(eu, ev, ew, m, fx, g, p, tol, budget)
        total += itr
        if str_ == OK:
            return bb, bc, total, resr, OK, True
        if resr < best_res:
            best_b, best_c, best_res, best_st = bb, bc, resr, str_
        for r in range(8):
            thr = 10.0 ** (-3 - r)
            for _ in range(3):
                # a contracted solve may expose further clusters: repeat from its output
                nb, nc, itc, resc, stc = contract_solve(eu, ev, ew, m, fx, v, best_b, best_c, p,
                                                        thr, tol, budget // 8)
                total += itc
                if stc == OK:
                    return nb, nc, total, resc, OK, False
                if resc < best_res:
                    best_b, best_c, best_res, best_st = nb, nc, resc, stc
                else:
                    break
    g = f
    st = st1
    res = res1
    for j in range(1, 5):
        pj = 2.0 * (p / 2.0) ** (j / 4.0)
        if j == 4:
            pj = p
        g, itj, res, st = newton_min(eu, ev, ew, m, fx, g, zero, pj, tol, budget // 4, noff, T_FLOOR)
        total += itj
    if st == OK:
        return g, zero, total, res, OK, True
    if res < best_res:
        best_b, best_c, best_res, best_st = g, zero, res, st
    return best_b, best_c, total, best_res, best_st, True


def edge_offsets(eu, ev, base):
    off = np.empty(eu.shape[0])
    for k in range(eu.shape[0]):
        off[k] = base[ev[k]] - base[eu[k]]
    return off


def capacity_value(eu, ev, ew, m, fixed, vals, p, tol, maxit):
    base, c, it, res, st, cont = solve_pinned(eu, ev, ew, m, fixed, vals, p, tol, maxit)
    return energy(c, eu, ev, ew, p, edge_offsets(eu, ev, base)), it, res, st


def pair_capacities(eu, ev, ew, m, host, p, tol, maxit):
    """Capacities of every unordered pair of disjoint nonempty subsets of ``host``.

    Pairs are encoded as bitmasks over ``host`` positions; the lowest
    assigned position always belongs to ``A`` so each unordered pair
    appears once. Returns ``(mask_a, mask_b, cap, worst_residual, worst_status)``.
    """
    h = host.shape[0]
    n = m.shape[0]
    total = 1
    for _ in range(h):
        total *= 3
    count = (total - 2 * (1 << h) + 1) // 2
    ma = np.zeros(count, dtype=np.int64)
    mb = np.zeros(count, dtype=np.int64)
    cap = np.zeros(count)
    worst_res = 0.0
    worst_st = OK
    digits = np.zeros(h, dtype=np.int64)
    k = 0
    for code in range(total):
        c = code
        lowest = -1
        a_mask = 0
        b_mask = 0
        for q in range(h):
            digits[q] = c % 3
            c //= 3
            if digits[q] != 0 and lowest < 0:
                lowest = digits[q]
            if digits[q] == 1:
                a_mask |= 1 << q
            elif digits[q] == 2:
                b_mask |= 1 << q
        if lowest != 1 or b_mask == 0:
            continue
        fixed = np.zeros(n, dtype=np.bool_)
        vals = np.zeros(n)
        for q in range(h):
            if digits[q] == 1:
                fixed[host[q]] = True
                vals[host[q]] = 1.0
            elif digits[q] == 2:
                fixed[host[q]] = True
        val, it, res, st = capacity_value(eu, ev, ew, m, fixed, vals, p, tol, maxit)
        ma[k] = a_mask
        mb[k] = b_mask
        cap[k] = val
        if res > worst_res:
            worst_res = res
        if st > worst_st:
            worst_st = st
        k += 1
    return ma, mb, cap, worst_res, worst_st


def dirichlet_capacities(eu, ev, ew, m, inner, outer, p, tol, maxit):
    """Cap(A, outer) for every nonempty A within the ``inner`` positions.

    Entry ``k`` belongs to the bitmask ``k + 1`` over ``inner``. Returns
    ``(cap, worst_residual, worst_status)``.
    """
    h = inner.shape[0]
    n = m.shape[0]
    count = (1 << h) - 1
    cap = np.zeros(count)
    worst_res = 0.0
    worst_st = OK
    for mask in range(1, count + 1):
        fixed = outer.copy()
        vals = np.zeros(n)
        for q in range(h):
            if (mask >> q) & 1:
                fixed[inner[q]] = True
                vals[inner[q]] = 1.0
        val, it, res, st = capacity_value(eu, ev, ew, m, fixed, vals, p, tol, maxit)
        cap[mask - 1] = val
        if res > worst_res:
            worst_res = res
        if st > worst_st:
            worst_st = st
    return cap, worst_res, worst_st


def coarea_integral(eu, ev, ew, m, absf, a, p, extra, tol, maxit):
    """Integral over t of Cap({|f| >= a t}, {|f| < t}) d(t^p), exactly.

    The integrand is constant between consecutive values of
    ``{|f|} U {|f|/a}`` (plus ``extra`` breakpoints); each interval is
    evaluated once at its midpoint.
    """
    n = absf.shape[0]
    pts = np.concatenate((np.zeros(1), absf, absf / a, extra))
    pts = np.unique(pts)
    total = 0.0
    worst_res = 0.0
    worst_st = OK
    solves = 0
    for i in range(pts.shape[0] - 1):
        t0 = pts[i]
        t1 = pts[i + 1]
        if not t1 > t0:
            continue
        tm = 0.5 * (t0 + t1)
        fixed = np.zeros(n, dtype=np.bool_)
        vals = np.zeros(n)
        has_a = False
        has_b = False
        for x in range(n):
            if absf[x] >= a * tm:
                fixed[x] = True
                vals[x] = 1.0
                has_a = True
            elif absf[x] < tm:
                fixed[x] = True
                has_b = True
        if not (has_a and has_b):
            continue
        val, it, res, st = capacity_value(eu, ev, ew, m, fixed, vals, p, tol, maxit)
        solves += 1
        total += val * (t1 ** p - t0 ** p)
        if res > worst_res:
            worst_res = res
        if st > worst_st:
            worst_st = st
    return total, solves, worst_res, worst_st

# ---- nonlinear eigenproblems --------------------------------------
#
# Quotient E(f) / N(f) with N(f) = min_c sum dm |f - c|^p ("centered")
# or N(f) = sum dm |f|^p with pinned zeros (Dirichlet). ``dm`` is the
# denominator measure: m on Omega for Neumann, m on the boundary for
# Steklov, m everywhere for a closed graph.


def denominator(f, dm, p, centered):
    if centered:
        c = p_mean(f, dm, p, 1e-15)
    else:
        c = 0.0
    return float(np.sum(dm * np.abs(f - c) ** p)), c


def quotient(f, eu, ev, ew, dm, p, centered):
    den, c = denominator(f, dm, p, centered)
    if den <= 0.0:
        return np.inf
    return energy(f, eu, ev, ew, p, np.zeros(eu.shape[0])) / den


def normalize(f, dm, p, centered):
    den, c = denominator(f, dm, p, centered)
    if den <= 0.0:
        return f - c
    return (f - c) / den ** (1.0 / p)


def inverse_power(eu, ev, ew, m, dm, fixed, f0, p, centered, maxit):
    """Nonlinear inverse iteration; the quotient never increases.

    Each step minimizes E(g)/p - <dm phi(f), g> (one vertex pinned as a
    translation gauge in the centered case) and renormalizes. Stops
    when the relative decrease stays below 1e-12 for 5 iterates.
    """
    n = f0.shape[0]
    pin = fixed.copy()
    if centered:
        for i in range(n):
            if not pin[i]:
                pin[i] = True
                break
    f = normalize(f0, dm, p, centered)
    lam = quotient(f, eu, ev, ew, dm, p, centered)
    quiet = 0
    it = 0
    while it < maxit:
        s = dm * phi_vec(f, p)
        scale = lam ** (-1.0 / (p - 1.0)) if lam > 0.0 else 1.0
        start = np.zeros(n)
        for i in range(n):
            if not fixed[i]:
                start[i] = f[i] * scale
        if centered:
            ref = start[np.nonzero(pin & ~fixed)[0][0]]
            for i in range(n):
                if not fixed[i]:
                    start[i] -= ref
        smax = 0.0
        for i in range(n):
            if m[i] > 0.0 and abs(s[i]) / m[i] > smax:
                smax = abs(s[i]) / m[i]
        g, _, _, st = newton_min(eu, ev, ew, m, pin, start, s, p, 1e-11 * (1.0 + smax), 100,
                                 np.zeros(eu.shape[0]), T_FLOOR)
        g = normalize(g, dm, p, centered)
        new = quotient(g, eu, ev, ew, dm, p, centered)
        it += 1
        if not new <= lam * (1.0 + 1e-14):
            break
        rel = (lam - new) / lam if lam > 0.0 else 0.0
        f = g
        lam = new
        if rel < 1e-12:
            quiet += 1
            if quiet >= 5:
                break
        else:
            quiet = 0
    return f, lam, it


def eigen_residual(u, eu, ev, ew, m, dm, fixed, lam, p, off):
    """max |Delta_p u + lam (dm/m) phi(u)| over unpinned vertices.

    ``off`` adds to each edge difference (see :func:`contract_polish`).
    """
    F = flux(u, eu, ev, ew, p, off)
    ph = phi_vec(u, p)
    r = 0.0
    for i in range(u.shape[0]):
        if not fixed[i]:
            v = abs(F[i] + lam * dm[i] * ph[i]) / m[i]
            if v > r:
                r = v
    return r


def polish(eu, ev, ew, m, dm, fixed, u0, p, centered, maxit, balance):
    """Newton on the eigen-equation plus normalization, least-squares steps.

    ``u0`` must be normalized (and centered when ``centered``). Vertices in
    ``balance`` are pinned (at 0) but their flux balance is kept as an extra
    equation. Returns the improved ``(u, lam, residual)``; steps that do not
    lower the residual are rejected.
    """
    free = free_index(fixed)
    nf = free.shape[0]
    bal = np.nonzero(balance)[0]
    nb = bal.shape[0]
    idx = np.concatenate((free, bal))
    check = fixed & ~balance
    zoff = np.zeros(eu.shape[0])
    u = u0.copy()
    lam = quotient(u, eu, ev, ew, dm, p, centered)
    res = eigen_residual(u, eu, ev, ew, m, dm, check, lam, p, zoff)
    for _ in range(maxit):
        F = flux(u, eu, ev, ew, p, zoff)
        ph = phi_vec(u, p)
        rhs = np.empty(nf + nb + 1)
        for a in range(nf):
            i = free[a]
            rhs[a] = -(F[i] + lam * dm[i] * ph[i])
        for b in range(nb):
            rhs[nf + b] = -F[bal[b]]
        rhs[nf + nb] = -(float(np.sum(dm * np.abs(u) ** p)) - 1.0)
        H = hessian(u, eu, ev, ew, p, idx, zoff, T_FLOOR)
        J = np.zeros((nf + nb + 1, nf + 1))
        J[:nf + nb, :nf] = -H[:, :nf]
        for a in range(nf):
            i = free[a]
            au = abs(u[i])
            if p < 2.0 and au < T_FLOOR:
                au = T_FLOOR
            J[a, a] += lam * dm[i] * (p - 1.0) * au ** (p - 2.0)
            J[a, nf] = dm[i] * ph[i]
            J[nf + nb, a] = p * dm[i] * ph[i]
        step = np.linalg.lstsq(J, rhs, -1.0)[0]
        best_u = u
        best_lam = lam
        best_res = res
        t = 1.0
        for _ in range(20):
            ut = u.copy()
            for a in range(nf):
                ut[free[a]] = u[free[a]] + t * step[a]
            lt = lam + t * step[nf]
            rt = eigen_residual(ut, eu, ev, ew, m, dm, check, lt, p, zoff)
            if rt < best_res:
                best_u = ut
                best_lam = lt
                best_res = rt
                break
            t *= 0.5
        if best_res >= res:
            break
        u = best_u
        lam = best_lam
        res = best_res
        if res <= 1e-13:
            break
    return u, lam, res


def contract_polish(eu, ev, ew, m, dm, fixed, u, p, centered, thr):
    """Polish on the graph with near-flat structure of ``u`` made exact.

    Pinned vertices form one cluster. Free values within ``thr`` (relative
    to max |u|) of 0 become exact zeros that keep their flux balance as an
    equation; other neighbours within ``thr`` of each other are merged. The
    contracted eigenproblem is polished and expanded. Returns
    ``(u, lam, residual)`` measured on the original graph.
    """
    n = u.shape[0]
    scale = float(np.max(np.abs(u)))
    zoff = np.zeros(eu.shape[0])
    if scale == 0.0:
        return u, zoff, np.inf, np.inf
    cut = thr * scale
    parent = np.arange(n + 1)  # node n collects the pinned vertices
    zero = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        if fixed[i]:
            parent[i] = n
        elif abs(u[i]) <= cut:
            zero[i] = True
    tree = np.zeros(eu.shape[0], dtype=np.bool_)
    for k in range(eu.shape[0]):
        if abs(u[ev[k]] - u[eu[k]]) > cut or zero[eu[k]] or zero[ev[k]] \
                or fixed[eu[k]] or fixed[ev[k]]:
            continue
        a = eu[k]
        while parent[a] != a:
            a = parent[a]
        b = ev[k]
        while parent[b] != b:
            b = parent[b]
        if a == b:
            continue
        tree[k] = True
        if a < b:
            parent[a] = b
        else:
            parent[b] = a
    root = np.empty(n, dtype=np.int64)
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        root[i] = a
    label = np.full(n + 1, -1, dtype=np.int64)
    c = 0
    for i in range(n):
        if label[root[i]] < 0:
            label[root[i]] = c
            c += 1
    cm = np.zeros(c)
    cdm = np.zeros(c)
    cfix = np.zeros(c, dtype=np.bool_)
    cbal = np.zeros(c, dtype=np.bool_)
    csum = np.zeros(c)
    cnt = np.zeros(c)
    for i in range(n):
        q = label[root[i]]
        cm[q] += m[i]
        cdm[q] += dm[i]
        csum[q] += u[i]
        cnt[q] += 1.0
        if root[i] == n:
            cfix[q] = True
        elif zero[i]:
            cfix[q] = True
            cbal[q] = True
    ne = 0
    for k in range(eu.shape[0]):
        if label[root[eu[k]]] != label[root[ev[k]]]:
            ne += 1
    if ne == 0:
        return u, zoff, np.inf, np.inf
    cu = np.empty(ne, dtype=np.int64)
    cv = np.empty(ne, dtype=np.int64)
    cw = np.empty(ne)
    j = 0
    for k in range(eu.shape[0]):
        qa = label[root[eu[k]]]
        qb = label[root[ev[k]]]
        if qa != qb:
            cu[j] = qa
            cv[j] = qb
            cw[j] = ew[k]
            j += 1
    g = np.zeros(c)
    for q in range(c):
        if not cfix[q]:
            g[q] = csum[q] / cnt[q]
    den = float(np.sum(cdm * np.abs(g) ** p))
    if not den > 0.0:
        return u, zoff, np.inf, np.inf
    g = g / den ** (1.0 / p)
    g, lam, _ = polish(cu, cv, cw, cm, cdm, cfix, g, p, False, 60, cbal)
    out = np.empty(n)
    for i in range(n):
        out[i] = g[label[root[i]]]
    off = route_offsets(out, eu, ev, ew, dm, fixed, tree, lam, p)
    lam = quotient(out, eu, ev, ew, dm, p, centered)
    return out, off, lam, eigen_residual(out, eu, ev, ew, m, dm, fixed, lam, p, off)


def route_offsets(u, eu, ev, ew, dm, fixed, tree, lam, p):
    """Edge offsets resolving the flux inside clusters that ``u`` keeps flat.

    The ``tree`` edges span each flat cluster. The imbalance of every
    member is pushed towards the cluster root along them, each tree edge
    gets the difference carrying its flux, and the members receive the
    accumulated corrections ``delta``. Returns ``delta[v] - delta[u]`` per
    edge; these differences are far below the resolution of ``u``.
    """
    n = u.shape[0]
    ne = eu.shape[0]
    F = flux(u, eu, ev, ew, p, np.zeros(ne))
    b = F + lam * dm * phi_vec(u, p)
    deg = np.zeros(n + 1, dtype=np.int64)
    for k in range(ne):
        if tree[k]:
            deg[eu[k] + 1] += 1
            deg[ev[k] + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    adj = np.empty(deg[n], dtype=np.int64)
    fill = deg[:n].copy()
    for k in range(ne):
        if tree[k]:
            adj[fill[eu[k]]] = k
            fill[eu[k]] += 1
            adj[fill[ev[k]]] = k
            fill[ev[k]] += 1
    seen = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    delta = np.zeros(n)
    t = np.zeros(n)
    for s in range(n):
        if seen[s] or deg[s + 1] == deg[s]:
            continue
        seen[s] = True
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            i = order[head]
            head += 1
            for a in range(deg[i], deg[i + 1]):
                k = adj[a]
                j = ev[k] if eu[k] == i else eu[k]
                if not seen[j]:
                    seen[j] = True
                    pedge[j] = k
                    order[tail] = j
                    tail += 1
        # leaves first: t[i] is the parent edge's share of the flux at i
        for h in range(tail - 1, 0, -1):
            i = order[h]
            if not fixed[i]:
                t[i] -= b[i]
            k = pedge[i]
            j = ev[k] if eu[k] == i else eu[k]
            t[j] += t[i]
        for h in range(1, tail):
            i = order[h]
            k = pedge[i]
            q = t[i] if eu[k] == i else -t[i]
            x = q / ew[k]
            d = np.sign(x) * abs(x) ** (1.0 / (p - 1.0))
            j = ev[k] if eu[k] == i else eu[k]
            # the edge difference u[ev] - u[eu] + off must equal d
            delta[i] = delta[j] + (-d if eu[k] == i else d)
    off = np.zeros(ne)
    for k in range(ne):
        off[k] = delta[ev[k]] - delta[eu[k]]
    return off


def rayleigh_solve(eu, ev, ew, m, dm, fixed, f0, p, centered, maxit):
    """Inverse iteration, Newton polish, snapping; certified on exit.

    Returns ``(u, off, value, residual, iterations)`` with ``u`` scaled to
    sup norm 1 (centered when ``centered``); ``value`` is the quotient of
    ``u`` and ``off`` holds the edge offsets the residual was measured with.
    """
    zoff = np.zeros(eu.shape[0])
    f, lam, it = inverse_power(eu, ev, ew, m, dm, fixed, f0, p, centered, maxit)
    u, lam2, res = polish(eu, ev, ew, m, dm, fixed, f, p, centered, 60,
                          np.zeros(fixed.shape[0], dtype=np.bool_))
    if centered:
        u = u - p_mean(u, dm, p, 0.0)
    if p < 2.0:
        us = snap(u, eu, ev, fixed, True, SNAP_TOL)
        ls = quotient(us, eu, ev, ew, dm, p, centered)
        if eigen_residual(us, eu, ev, ew, m, dm, fixed, ls, p, zoff) <= \
                eigen_residual(u, eu, ev, ew, m, dm, fixed,
                               quotient(u, eu, ev, ew, dm, p, centered), p, zoff):
            u = us
    val = quotient(u, eu, ev, ew, dm, p, centered)
    if val > lam:
        # polishing drifted to a worse point; keep the monotone iterate
        u = f
        val = lam
    top = float(np.max(np.abs(u)))
    if top > 0.0:
        u = u / top
    off = zoff
    val = quotient(u, eu, ev, ew, dm, p, centered)
    res = eigen_residual(u, eu, ev, ew, m, dm, fixed, val, p, off)
    if p < 2.0 and res > 1e-10:
        # for p < 2 eigenfunctions may vanish or be flat on whole regions
        for r in range(9):
            uc, oc, lc, rc = contract_polish(eu, ev, ew, m, dm, fixed, u, p, centered,
                                             10.0 ** (-2 - r))
            if rc < res and lc <= val * (1.0 + 1e-6):
                top = float(np.max(np.abs(uc)))
                u = uc / top
                off = oc / top
                val = quotient(u, eu, ev, ew, dm, p, centered)
                res = eigen_residual(u, eu, ev, ew, m, dm, fixed, val, p, off)
            if res <= 1e-10:
                break
    return u, off, val, res, it
