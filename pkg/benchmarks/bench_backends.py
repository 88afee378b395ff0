"""Time the numba and pure-numpy kernel backends on the same workloads.

    python benchmarks/bench_backends.py [--repeat N] [--p P]

Each workload runs once per backend to warm up (numba compile or cache
load), then ``--repeat`` times; the best wall time is reported.
"""
from __future__ import annotations

import argparse
import time

from pcap.capacity import capacity
from pcap.coarea import coarea_integral, random_potentials
from pcap.eigen import neumann_eigenvalue, steklov_eigenvalue
from pcap.graph import build_domain, generate
from pcap.harness import corpus_domains
from pcap.isocap import alpha_closed
from pcap.kernels import HAS_NUMBA


def workloads(p):
    grid = generate("grid", 6, 6)
    gd = build_domain(grid, grid.vertices)
    rnd = generate("random", 9, 0.5, (0.5, 2.0), 2, (0.5, 2.0))
    (_, half), = corpus_domains(rnd, "random(9)", 42, ("half",))
    pots = list(random_potentials(half, 10, seed=0))
    return {
        "capacity grid(6x6)": lambda b: capacity(gd, {"0,0"}, {"5,5"}, p, backend=b),
        "alpha_closed random(9)": lambda b: alpha_closed(rnd, p, backend=b),
        "neumann random(9) half": lambda b: neumann_eigenvalue(half, p, restarts=8, backend=b),
        "steklov random(9) half": lambda b: steklov_eigenvalue(half, p, restarts=8, backend=b),
        "coarea x10": lambda b: [coarea_integral(half, f, 2.0, p, backend=b) for f in pots],
    }


def best_time(fn, backend, repeat):
    fn(backend)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(backend)
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--p", type=float, default=1.5)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if HAS_NUMBA else ["numpy"]
    print(f"p = {args.p}, best of {args.repeat}")
    print(f"{'workload':28s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in workloads(args.p).items():
        t = {b: best_time(fn, b, args.repeat) for b in backends}
        row = f"{name:28s}" + "".join(f"{t[b]:11.4f}s" for b in backends)
        if len(backends) == 2:
            row += f"{t['numpy'] / t['numba']:11.1f}x"
        print(row, flush=True)


if __name__ == "__main__":
    main()
