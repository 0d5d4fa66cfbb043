"""Kernel selector.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``WSTARHOM_PURE=1`` is set) the numpy versions are
used. ``BACKEND`` records the choice.
"""

import os

import numpy as np

from . import _pykernels

_ext = None
if os.environ.get("WSTARHOM_PURE") != "1":
    try:
        from . import _ckernels as _ext
    except ImportError:  # extension not built
        _ext = None

BACKEND = "cython" if _ext is not None else "numpy"
_impl = _ext if _ext is not None else _pykernels

__all__ = [
    "BACKEND",
    "trig_eval",
    "pucci_weights_2d",
    "sweep_pucci_1d",
    "sweep_pucci_2d",
    "sweep_weighted",
    "backend_module",
]


def backend_module(name=None):
    """Return the kernel module for ``name`` in {"cython", "numpy", None}."""
    if name is None:
        return _impl
    if name == "numpy":
        return _pykernels
    if name == "cython":
        if _ext is None:
            raise ImportError("compiled kernels are not available")
        return _ext
    raise ValueError(f"unknown backend {name!r}")


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def trig_eval(freqs, a, b, constant, pts):
    return _impl.trig_eval(_c(freqs), _c(a), _c(b), float(constant), _c(pts))


def pucci_weights_2d(D, lam, Lam):
    return _impl.pucci_weights_2d(_c(D), float(lam), float(Lam))


def sweep_pucci_1d(u, h, tau, lam, Lam, sgn, c, delta, n_steps):
    return _impl.sweep_pucci_1d(u, h, tau, lam, Lam, sgn, c, delta, int(n_steps))


def sweep_pucci_2d(u, h, tau, lam, Lam, sgn, c, delta, n_steps):
    return _impl.sweep_pucci_2d(u, h, tau, lam, Lam, sgn, c, delta, int(n_steps))


def sweep_weighted(u, W, const, h, tau, delta, n_steps):
    return _impl.sweep_weighted(u, W, const, h, tau, delta, int(n_steps))
