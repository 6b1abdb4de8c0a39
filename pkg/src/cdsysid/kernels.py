"""Kernel selection: the compiled extension when importable, NumPy otherwise.

Set ``CDSYSID_PURE=1`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback.modal_loop

if not os.environ.get("CDSYSID_PURE"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        _impl = _kernels.modal_loop
        BACKEND = "cython"


def modal_loop(d, n, r, sigma, gamma, p, l, delay, backend=None):
    """Simulate decoupled IMC loops; arrays are ``N x m`` (time x modes).

    Returns modal outputs and modal inputs. ``p`` and ``l`` are the discrete
    poles of the actuator and shaping filters, ``delay`` the shared integer
    transport delay in samples.
    """
    args = [np.ascontiguousarray(a, dtype=float) for a in (d, n, r, sigma, gamma)]
    if backend is None:
        fn = _impl
    elif backend == "python":
        fn = _fallback.modal_loop
    elif backend == "cython":
        from . import _kernels
        fn = _kernels.modal_loop
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return fn(*args, float(p), float(l), int(delay))
