"""Hot numeric kernels: p-energy, p-harmonic solves, pair enumeration,
nonlinear inverse iteration and the coarea integral.

Two backends share one set of algorithm bodies (``_algorithms.py``):

* ``"numba"``: loop-style primitives (``_prims_loop.py``) and the algorithms
  compiled with ``numba.njit(cache=True)``;
* ``"numpy"``: the same algorithms run as plain Python over vectorized numpy
  primitives (``_prims_numpy.py``).

The active backend is numba when importable, unless the environment variable
``PCAP_PURE_NUMPY`` is set to a truthy value. Graphs reach the kernels as edge
arrays ``eu, ev, ew`` over vertices ``0..n-1`` plus a measure array ``m``.
"""
from __future__ import annotations

import importlib.util
import os
import sys
from functools import lru_cache, partial
from pathlib import Path
from types import SimpleNamespace

try:  # pragma: no cover - import guard
    import numba
except ImportError:  # pragma: no cover
    numba = None

from ._algorithms import MAXITER, OK, SNAP_TOL, STALLED, T_FLOOR  # noqa: F401

ENV_FLAG = "PCAP_PURE_NUMPY"
HAS_NUMBA = numba is not None
_HERE = Path(__file__).parent


def _wants_numpy():
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")


def default_backend() -> str:
    return "numpy" if (_wants_numpy() or not HAS_NUMBA) else "numba"


def _load(filename, tag, inject, jit):
    # a private module instance per backend, so globals can differ
    # registered in sys.modules under a stable name so numba's on-disk cache
    # can resolve the module when it reloads compiled code
    name = f"pcap._{tag}_{filename[:-3].lstrip('_')}"
    mod = sys.modules.get(name)
    if mod is None or not getattr(mod, "_pcap_ready", False):
        spec = importlib.util.spec_from_file_location(name, _HERE / filename)
        mod = importlib.util.module_from_spec(spec)
        sys.modules[name] = mod
        spec.loader.exec_module(mod)
        for key, fn in inject.items():
            setattr(mod, key, fn)
        if jit is not None:
            for key in mod.__all__:
                setattr(mod, key, jit(getattr(mod, key)))
        mod._pcap_ready = True
    return {key: getattr(mod, key) for key in mod.__all__}


def get_kernels(backend: str | None = None) -> SimpleNamespace:
    """Kernel namespace for ``"numba"`` or ``"numpy"`` (default: the active one)."""
    return _kernels(backend or default_backend())


@lru_cache(maxsize=None)
def _kernels(backend: str) -> SimpleNamespace:
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba is not installed")
        jit = partial(numba.njit, cache=True)
        prims = _load("_prims_loop.py", "numba", {}, jit)
    elif backend == "numpy":
        jit = None
        prims = _load("_prims_numpy.py", "numpy", {}, None)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    inject = {k: prims[k] for k in ("phi_vec", "energy", "flux", "hessian")}
    algs = _load("_algorithms.py", backend, inject, jit)
    return SimpleNamespace(backend=backend, **prims, **algs)
