"""Command line interface ``pcap``.

Every command except ``gen`` and ``verify`` prints one JSON object on
stdout. Errors print a message on stderr and exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .errors import InvalidArgument, PcapError

FAMILY_HELP = ("path N | cycle N | complete N | star N | grid R C | "
               "random N PROB [WLO WHI SEED [MLO MHI]]")


def _number(tok):
    try:
        return int(tok)
    except ValueError:
        try:
            return float(tok)
        except ValueError:
            raise InvalidArgument(f"graph parameter must be numeric, got {tok!r}") from None


def _family_params(family, params):
    vals = [_number(t) for t in params]
    if family != "random":
        return vals
    if len(vals) not in (2, 5, 7):
        raise InvalidArgument("random needs N PROB [WLO WHI SEED [MLO MHI]]")
    out = vals[:2]
    if len(vals) >= 5:
        out += [(vals[2], vals[3]), int(vals[4])]
    if len(vals) == 7:
        out.append((vals[5], vals[6]))
    return out


def _ids(text):
    return frozenset(t for t in text.replace(",", " ").split() if t)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (frozenset, set)):
        return sorted(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit(obj):
    print(json.dumps(_jsonable(obj), sort_keys=True))


def _domain(args):
    from .graph import build_domain, load_domain, load_graph

    g = load_graph(args.graph)
    omega = load_domain(args.domain) if args.domain else g.vertices
    return g, build_domain(g, omega)


def cmd_gen(args):
    from .graph import generate, save_domain, save_graph
    from .harness import corpus_domains

    g = generate(args.family, *_family_params(args.family, args.params))
    save_graph(g, args.output)
    if args.domain_out:
        doms = dict(corpus_domains(g, "g", args.seed, (args.domain_kind,)))
        if not doms:
            raise InvalidArgument(f"no {args.domain_kind} domain found")
        save_domain(next(iter(doms.values())).omega, args.domain_out)
    return 0


def cmd_cap(args):
    from .capacity import capacity

    _, d = _domain(args)
    r = capacity(d, _ids(args.A), _ids(args.B), args.p)
    _emit({"value": r.value, "iterations": r.iterations, "residual": r.residual,
           "continued": r.continued, "ill_conditioned": r.ill_conditioned, "potential": r.potential})
    return 0


def cmd_isocap(args):
    from . import isocap

    g, d = _domain(args)
    h = args.heuristic
    if args.kind == "D":
        r = isocap.alpha_dirichlet(d, args.p, heuristic=h)
    elif args.kind == "N":
        r = isocap.alpha_neumann(d, args.p, heuristic=h)
    elif args.kind == "S":
        r = isocap.alpha_steklov(d, args.p, heuristic=h)
    else:
        r = isocap.alpha_closed(d if args.domain else g, args.p, heuristic=h)
    _emit({"kind": r.kind, "value": r.value, "witness_a": r.witness_a, "witness_b": r.witness_b,
           "capacity_at_witness": r.capacity_at_witness, "pairs_examined": r.pairs_examined,
           "exhaustive": r.exhaustive})
    return 0


def cmd_eig(args):
    from . import eigen

    g, d = _domain(args)
    kw = dict(seed=args.seed, restarts=args.restarts)
    if args.kind == "dirichlet":
        if args.restarts is None:
            kw["restarts"] = 1
        r = eigen.dirichlet_eigenvalue(d, args.p, **kw)
    else:
        if args.restarts is None:
            kw["restarts"] = eigen.DEFAULT_RESTARTS
        fn = eigen.neumann_eigenvalue if args.kind == "neumann" else eigen.steklov_eigenvalue
        r = fn(d, args.p, **kw)
    _emit({"kind": r.kind, "value": r.value, "residual": r.residual, "method": r.method,
           "restarts_used": r.restarts_used, "eigenfunction": r.eigenfunction})
    return 0


def cmd_coarea(args):
    from .coarea import coarea_integral, random_potentials

    _, d = _domain(args)
    checks = []
    for f in random_potentials(d, args.random_f, args.seed):
        c = coarea_integral(d, f, args.a, args.p)
        checks.append({"integral": c.integral, "energy": c.energy, "constant": c.constant,
                       "slack": c.slack, "holds": c.holds})
    _emit({"a": args.a, "p": args.p, "checks": checks, "all_hold": all(c["holds"] for c in checks)})
    return 0 if all(c["holds"] for c in checks) else 1


def cmd_verify(args):
    from .harness import GROUPS, run_corpus

    groups = GROUPS if args.which == "all" else (args.which,)
    res = run_corpus(args.config, groups=groups, output=args.output)
    failed = sum(not r["pass"] for r in res.records)
    where = f" -> {res.path}" if res.path else ""
    print(f"{len(res.records)} reports, {failed} failed{where}")
    return res.exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcap", description="Isocapacitary bounds for p-Laplacian "
                                 "eigenvalues on weighted graphs.")
    ap.add_argument("--version", action="version", version=f"pcap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="generate a graph file")
    s.add_argument("family")
    s.add_argument("params", nargs="*", help=FAMILY_HELP)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--domain-out", help="also write a domain file")
    s.add_argument("--domain-kind", choices=("full", "single", "half"), default="half")
    s.add_argument("--seed", type=int, default=0, help="seed for the half-split domain")
    s.set_defaults(func=cmd_gen)

    def graph_opts(s, domain_required=False):
        s.add_argument("-g", "--graph", required=True)
        s.add_argument("-d", "--domain", required=domain_required,
                       help="file of omega vertex ids (default: all vertices)")
        s.add_argument("-p", type=float, required=True)

    s = sub.add_parser("cap", help="capacity of a condenser (A, B)")
    graph_opts(s)
    s.add_argument("-A", required=True, help="comma or space separated ids")
    s.add_argument("-B", required=True)
    s.set_defaults(func=cmd_cap)

    s = sub.add_parser("isocap", help="isocapacitary constant")
    s.add_argument("kind", choices=("D", "N", "S", "closed"))
    graph_opts(s)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", dest="heuristic", action="store_false")
    mode.add_argument("--heuristic", dest="heuristic", action="store_true")
    s.set_defaults(func=cmd_isocap, heuristic=False)

    s = sub.add_parser("eig", help="first eigenvalue")
    s.add_argument("kind", choices=("dirichlet", "neumann", "steklov"))
    graph_opts(s)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--restarts", type=int, default=None)
    s.set_defaults(func=cmd_eig)

    s = sub.add_parser("coarea", help="coarea inequality on random potentials")
    graph_opts(s)
    s.add_argument("-a", type=float, required=True)
    s.add_argument("--random-f", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_coarea)

    s = sub.add_parser("verify", help="run verification suites over a corpus")
    s.add_argument("which", choices=("dirichlet", "neumann", "steklov", "infinite", "all"))
    s.add_argument("-c", "--config", required=True, help="JSON config file")
    s.add_argument("-o", "--output", help="report path (overrides the config)")
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PcapError, OSError) as exc:
        print(f"pcap: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
