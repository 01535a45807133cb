"""Kernel backend selection and chunked parallel dispatch.

The compiled kernel is used when importable unless ``FRACLAB_BACKEND=python``
is set.  Batches are split into fixed-size chunks whose results are stitched
back in order, so the output never depends on the number of workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

CHUNK = 512

_compiled = None
if os.environ.get("FRACLAB_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_kernel(name=None):
    """Module providing ``bilinear_1d`` for backend ``name`` (default: active)."""
    name = name or BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def default_threads():
    env = os.environ.get("FRACLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return _threads


_threads = 1


def set_threads(n):
    """Worker count used by :func:`bilinear_batch` (env var still wins)."""
    global _threads
    _threads = max(1, int(n))


def bilinear_batch(xs, R, f_enc, g_enc, a, b, alpha, rel_tol, abs_tol, rule,
                   levels, floor, budget, backend=None, threads=None):
    """Run ``bilinear_1d`` over ``xs`` in chunks, possibly in parallel.

    ``rule`` is ``(nodes, weights, nodes_lo, weights_lo)``.
    """
    kern = get_kernel(backend)
    xs = np.ascontiguousarray(xs, dtype=float)
    R = np.ascontiguousarray(R, dtype=float)
    fP, fG = f_enc
    gP, gG = g_enc
    starts = list(range(0, len(xs), CHUNK)) or [0]

    def run(s):
        return kern.bilinear_1d(xs[s:s + CHUNK], R[s:s + CHUNK], fP, fG, gP, gG,
                                float(a), float(b), float(alpha), float(rel_tol),
                                float(abs_tol), *rule, int(levels),
                                float(floor), int(budget))

    threads = threads or default_threads()
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(5))
