"""Bound verification: isocapacitary brackets around first eigenvalues.

Each ``verify_*`` call computes the relevant isocapacitary constant and
eigenvalue and returns :class:`BoundsReport` records. :func:`run_corpus`
sweeps a graph corpus and a grid of exponents and writes one JSON object
per line, preceded by a header line.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coarea import c_p
from .eigen import (DEFAULT_RESTARTS, DEFAULT_SEED, dirichlet_eigenvalue, neumann_eigenvalue,
                    steklov_eigenvalue)
from .energy import check_p
from .errors import InvalidArgument, ParseError, PcapError, SizeError
from .graph import Domain, WeightedGraph, build_domain, generate, truncation_domain
from .isocap import (DIRICHLET_CAP, alpha_closed, alpha_dirichlet, alpha_neumann,
                     alpha_neumann_bar, alpha_steklov, alpha_steklov_bar, cheeger_closed,
                     cheeger_dirichlet)

__all__ = [
    "BoundsReport",
    "THEOREMS",
    "verify_dirichlet",
    "verify_neumann",
    "verify_steklov",
    "verify_infinite",
    "default_corpus",
    "default_config",
    "corpus_domains",
    "load_config",
    "run_corpus",
    "RunResult",
]

THEOREMS = ("dirichlet", "dirichlet-infinite", "neumann", "neumann-bar", "steklov", "steklov-bar",
            "closed-graph")
GROUPS = ("dirichlet", "neumann", "steklov", "infinite")
P_GRID = (1.2, 1.5, 2.0, 3.0, 4.0)
REL_TOL = 1e-7
MONOTONE_SLACK = 1e-8


@dataclass(frozen=True)
class BoundsReport:
    """``lower <= eigenvalue <= upper`` up to ``1e-7 (1 + eigenvalue)``.

    ``margin`` is the smaller of the two gaps relative to the eigenvalue
    (negative when a bound is violated). ``secondary`` holds side checks
    that do not affect ``passed``.
    """

    theorem: str
    graph_id: str
    p: float
    lower: float
    eigenvalue: float
    upper: float
    cheeger_lower: float | None = None
    cheeger_upper: float | None = None
    passed: bool = False
    margin: float = math.nan
    secondary: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {
            "theorem": self.theorem,
            "graph_id": self.graph_id,
            "p": self.p,
            "lower": self.lower,
            "eigenvalue": self.eigenvalue,
            "upper": self.upper,
            "cheeger_lower": self.cheeger_lower,
            "cheeger_upper": self.cheeger_upper,
            "pass": self.passed,
            "margin": self.margin,
            "secondary": self.secondary,
        }


def _report(theorem, graph_id, p, lower, eig, upper, ch_lower=None, ch_upper=None, secondary=None,
            extra_ok=True) -> BoundsReport:
    tol = REL_TOL * (1.0 + eig)
    ok = lower - tol <= eig <= upper + tol
    margin = min(eig - lower, upper - eig) / (eig if eig > 0 else 1.0)
    sec = dict(secondary or {})
    sec["bracket_ratio"] = upper / lower if lower > 0 else math.inf
    if ch_lower is not None and ch_upper is not None and ch_lower > 0:
        sec["cheeger_ratio"] = ch_upper / ch_lower
    return BoundsReport(theorem, graph_id, float(p), float(lower), float(eig), float(upper),
                        ch_lower, ch_upper, bool(ok and extra_ok), float(margin), sec)


def _lower_factor(p):
    return 1.0 / (2.0 ** p * c_p(p))


def _cheeger_lower(h, p):
    return 2.0 ** (p - 1.0) / p ** p * h ** p


def _eig_kw(seed, restarts, backend):
    return dict(seed=seed, restarts=restarts, backend=backend)


def verify_dirichlet(d: Domain, p, *, graph_id="", seed=DEFAULT_SEED, backend=None) -> BoundsReport:
    """alpha^D / (2^p C_p) <= lambda_1 <= alpha^D, with the Cheeger bracket alongside."""
    p = check_p(p)
    alpha = alpha_dirichlet(d, p, backend=backend)
    lam = dirichlet_eigenvalue(d, p, seed=seed, backend=backend)
    h = cheeger_dirichlet(d) if len(d.omega) <= DIRICHLET_CAP else None
    return _report("dirichlet", graph_id, p, alpha.value * _lower_factor(p), lam.value, alpha.value,
                   None if h is None else _cheeger_lower(h, p), h,
                   {"alpha": alpha.value, "residual": lam.residual})


def verify_neumann(d_or_graph, p, *, graph_id="", seed=DEFAULT_SEED, restarts=DEFAULT_RESTARTS,
                   backend=None) -> list[BoundsReport]:
    """Neumann brackets with alpha^N and with alpha-bar^N.

    For a graph without boundary a single ``closed-graph`` report is
    returned, with the Cheeger bracket alongside.
    """
    p = check_p(p)
    d = build_domain(d_or_graph, d_or_graph.vertices) if isinstance(d_or_graph, WeightedGraph) \
        else d_or_graph
    mu = neumann_eigenvalue(d, p, **_eig_kw(seed, restarts, backend))
    lo, up = _lower_factor(p), 2.0 ** (p - 1.0)
    if d.is_closed:
        alpha = alpha_closed(d, p, backend=backend).value
        h = cheeger_closed(d.boundary_graph) if d.n <= DIRICHLET_CAP else None
        return [_report("closed-graph", graph_id, p, alpha * lo, mu.value, alpha * up,
                        None if h is None else _cheeger_lower(h, p),
                        None if h is None else up * h,
                        {"alpha": alpha, "restarts": mu.restarts_used, "residual": mu.residual})]
    a = alpha_neumann(d, p, backend=backend).value
    b = alpha_neumann_bar(d, p, backend=backend).value
    gap = abs(a - b) / max(abs(a), abs(b))
    common = {"alpha": a, "alpha_bar": b, "alpha_gap": gap, "restarts": mu.restarts_used,
              "residual": mu.residual}
    return [_report("neumann", graph_id, p, a * lo, mu.value, a * up, secondary=common),
            _report("neumann-bar", graph_id, p, b * lo, mu.value, b * up, secondary=common)]


def verify_steklov(d: Domain, p, *, graph_id="", seed=DEFAULT_SEED, restarts=DEFAULT_RESTARTS,
                   backend=None) -> list[BoundsReport]:
    """Steklov brackets with upper constant 2^(p-1), for alpha^S and alpha-bar^S.

    ``secondary["factor2_upper_holds"]`` records whether sigma <= 2 alpha^S.
    """
    p = check_p(p)
    sigma = steklov_eigenvalue(d, p, **_eig_kw(seed, restarts, backend))
    a = alpha_steklov(d, p, backend=backend).value
    b = alpha_steklov_bar(d, p, backend=backend).value
    lo, up = _lower_factor(p), 2.0 ** (p - 1.0)
    tol = REL_TOL * (1.0 + sigma.value)
    common = {"alpha": a, "alpha_bar": b, "alpha_gap": abs(a - b) / max(abs(a), abs(b)),
              "factor2_upper": 2.0 * a, "factor2_upper_holds": bool(sigma.value <= 2.0 * a + tol),
              "restarts": sigma.restarts_used, "residual": sigma.residual}
    return [_report("steklov", graph_id, p, a * lo, sigma.value, a * up, secondary=common),
            _report("steklov-bar", graph_id, p, b * lo, sigma.value, b * up, secondary=common)]


def verify_infinite(family: str, p, radii, *, backend=None) -> list[BoundsReport]:
    """Dirichlet bracket on each truncation ``W_r``; lambda must not increase with r."""
    p = check_p(p)
    out = []
    prev = math.inf
    mono = True
    for r in sorted(radii):
        d = truncation_domain(family, r)
        rep = verify_dirichlet(d, p, graph_id=f"{family}/W{r}", backend=backend)
        mono = mono and rep.eigenvalue <= prev + MONOTONE_SLACK
        prev = rep.eigenvalue
        sec = dict(rep.secondary, radius=int(r), monotone=mono)
        out.append(BoundsReport("dirichlet-infinite", rep.graph_id, p, rep.lower, rep.eigenvalue,
                                rep.upper, rep.cheeger_lower, rep.cheeger_upper,
                                rep.passed and mono, rep.margin, sec))
    return out


# --------------------------------------------------------------------------
# corpus


def default_corpus() -> list[dict]:
    """Graph entries of the default corpus (all three domain kinds each)."""
    out = []
    out += [{"family": "path", "params": [n]} for n in range(2, 7)]
    out += [{"family": "cycle", "params": [n]} for n in range(3, 7)]
    out += [{"family": "complete", "params": [n]} for n in range(3, 6)]
    out += [{"family": "star", "params": [n]} for n in range(4, 7)]
    out += [{"family": "grid", "params": [2, 3]}, {"family": "grid", "params": [3, 3]}]
    for seed, n in zip(range(1, 6), (7, 8, 9, 10, 7)):
        out.append({"family": "random", "params": [n, 0.5, [0.5, 2.0], seed, [0.5, 2.0]]})
    return out


DEFAULT_INFINITE = (
    {"family": "half-line", "radii": [2, 4, 8]},
    {"family": "integer-line", "radii": [1, 2, 4]},
    {"family": "regular-tree(3)", "radii": [1, 2]},
)


def default_config() -> dict:
    return {"seed": DEFAULT_SEED, "p": list(P_GRID), "graphs": default_corpus(),
            "infinite": [dict(x) for x in DEFAULT_INFINITE], "restarts": DEFAULT_RESTARTS,
            "workers": 1, "output": "pcap-report.jsonl"}


def _graph_name(entry) -> str:
    fam, par = entry["family"], entry.get("params", [])
    if fam == "grid":
        return f"grid({par[0]}x{par[1]})"
    if fam == "random":
        return f"random({par[0]},seed={par[3] if len(par) > 3 else 0})"
    return f"{fam}({','.join(str(x) for x in par)})"


def _build_graph(entry) -> WeightedGraph:
    par = [tuple(x) if isinstance(x, list) else x for x in entry.get("params", [])]
    return generate(entry["family"], *par)


def corpus_domains(g: WeightedGraph, name: str, seed: int, kinds=("full", "single", "half")):
    """``(graph_id, Domain)`` for each requested domain kind.

    ``single`` is a vertex of largest weighted degree (smallest label on
    ties); ``half`` is a seeded random half of the vertices, redrawn until
    the boundary graph is connected.
    """
    out = []
    verts = sorted(g.vertices)
    for kind in kinds:
        if kind == "full":
            out.append((f"{name}/full", build_domain(g, g.vertices)))
        elif kind == "single":
            x = min(verts, key=lambda v: (-g.degree(v), v))
            out.append((f"{name}/single", build_domain(g, {x})))
        elif kind == "half":
            rng = np.random.default_rng([int(seed), zlib.crc32(name.encode())])
            k = max(1, len(verts) // 2)
            for _ in range(200):
                pick = rng.choice(len(verts), size=k, replace=False)
                try:
                    d = build_domain(g, {verts[i] for i in pick})
                except PcapError:
                    continue
                if d.boundary and d.boundary_graph.is_connected():
                    out.append((f"{name}/half", d))
                    break
        else:
            raise InvalidArgument(f"unknown domain kind {kind!r}")
    return out


# --------------------------------------------------------------------------
# configuration and reports


def _config_error(msg, path, fieldname=None):
    return ParseError(msg, path=path, field=fieldname)


def load_config(source) -> dict:
    """Parse and validate a JSON config (path, JSON text or dict); fills defaults.

    ``PCAP_SEED`` in the environment overrides the seed.
    """
    path = None
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            path = text
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ParseError(f"cannot read config: {exc.strerror}", path=path) from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{exc.msg} (column {exc.colno})", path=path, line=exc.lineno) from None
        if not isinstance(raw, dict):
            raise _config_error("config must be a JSON object", path)
    cfg = default_config()
    unknown = set(raw) - set(cfg)
    if unknown:
        raise _config_error(f"unknown keys {sorted(unknown)}", path)
    cfg.update(raw)
    try:
        cfg["p"] = [check_p(p) for p in cfg["p"]]
    except InvalidArgument as exc:
        raise _config_error(str(exc), path, "p") from None
    except TypeError:
        raise _config_error("p must be a list of exponents", path, "p") from None
    if cfg["graphs"] == "default":
        cfg["graphs"] = default_corpus()
    if not isinstance(cfg["graphs"], list):
        raise _config_error("graphs must be a list", path, "graphs")
    for i, entry in enumerate(cfg["graphs"]):
        if not isinstance(entry, dict) or "family" not in entry:
            raise _config_error("graph entry needs a 'family'", path, f"graphs[{i}]")
        try:
            _build_graph(entry)
        except (PcapError, TypeError, ValueError, IndexError) as exc:
            raise _config_error(str(exc), path, f"graphs[{i}]") from None
        for kind in entry.get("domains", ["full", "single", "half"]):
            if kind not in ("full", "single", "half"):
                raise _config_error(f"unknown domain kind {kind!r}", path, f"graphs[{i}].domains")
    for i, entry in enumerate(cfg["infinite"]):
        if not isinstance(entry, dict) or "family" not in entry or "radii" not in entry:
            raise _config_error("infinite entry needs 'family' and 'radii'", path, f"infinite[{i}]")
    env = os.environ.get("PCAP_SEED")
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise InvalidArgument(f"PCAP_SEED must be an integer, got {env!r}") from None
    for key in ("seed", "restarts", "workers"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 0:
            raise _config_error(f"{key} must be a nonnegative integer", path, key)
    return cfg


def _config_hash(cfg) -> str:
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class RunResult:
    path: Path | None
    records: tuple
    exit_code: int


def _applicable(d: Domain, group: str) -> bool:
    if group == "dirichlet":
        return not d.is_closed
    if group == "neumann":
        return len(d.omega) >= 2
    if group == "steklov":
        return len(d.boundary) >= 2
    return False


def _error_record(theorem, graph_id, p, exc) -> dict:
    return {"theorem": theorem, "graph_id": graph_id, "p": float(p), "pass": False,
            "error": f"{type(exc).__name__}: {exc}"}


def _run_graph_task(task) -> list[dict]:
    entry, seed, restarts, groups, ps = task
    name = _graph_name(entry)
    g = _build_graph(entry)
    out = []
    for gid, d in corpus_domains(g, name, seed, entry.get("domains", ("full", "single", "half"))):
        for group in groups:
            if not _applicable(d, group):
                continue
            for p in ps:
                try:
                    if group == "dirichlet":
                        reps = [verify_dirichlet(d, p, graph_id=gid, seed=seed)]
                    elif group == "neumann":
                        reps = verify_neumann(d, p, graph_id=gid, seed=seed, restarts=restarts)
                    else:
                        reps = verify_steklov(d, p, graph_id=gid, seed=seed, restarts=restarts)
                    out += [r.as_record() for r in reps]
                except (PcapError, np.linalg.LinAlgError) as exc:
                    out.append(_error_record(group, gid, p, exc))
    return out


def _run_infinite_task(task) -> list[dict]:
    entry, ps = task
    out = []
    for p in ps:
        try:
            out += [r.as_record() for r in verify_infinite(entry["family"], p, entry["radii"])]
        except (PcapError, SizeError) as exc:
            out.append(_error_record("dirichlet-infinite", entry["family"], p, exc))
    return out


def run_corpus(config=None, *, groups=GROUPS, output=None) -> RunResult:
    """Run the selected verification groups over a corpus; write the report.

    ``groups`` is any subset of ``dirichlet``, ``neumann``, ``steklov``,
    ``infinite``. Records are ordered by (graph_id, theorem, p) whatever
    the completion order. The exit code is 1 if any record failed or
    errored, else 0.
    """
    cfg = load_config(config if config is not None else {})
    bad = set(groups) - set(GROUPS)
    if bad:
        raise InvalidArgument(f"unknown verification groups {sorted(bad)}")
    finite = tuple(gr for gr in GROUPS if gr in groups and gr != "infinite")
    tasks = [(entry, cfg["seed"], cfg["restarts"], finite, cfg["p"]) for entry in cfg["graphs"]] \
        if finite else []
    inf_tasks = [(entry, cfg["p"]) for entry in cfg["infinite"]] if "infinite" in groups else []
    records = []
    if cfg["workers"] > 1 and len(tasks) + len(inf_tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            for chunk in pool.map(_run_graph_task, tasks):
                records += chunk
            for chunk in pool.map(_run_infinite_task, inf_tasks):
                records += chunk
    else:
        for t in tasks:
            records += _run_graph_task(t)
        for t in inf_tasks:
            records += _run_infinite_task(t)
    records.sort(key=lambda r: (r["graph_id"], r["theorem"], r["p"]))
    header = {"tool": "pcap", "version": __version__, "seed": cfg["seed"],
              "config_hash": _config_hash(cfg)}
    target = output if output is not None else cfg["output"]
    path = None
    if target:
        path = Path(target)
        with open(path, "w") as fh:
            fh.write(json.dumps(header) + "\n")
            for r in records:
                fh.write(json.dumps(r) + "\n")
    code = 0 if all(r["pass"] for r in records) else 1
    return RunResult(path, tuple(records), code)
