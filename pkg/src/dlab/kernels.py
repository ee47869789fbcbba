"""Backend selection for the mixture kernels.

The compiled extension is used when it imports; set ``DLAB_BACKEND=python``
to force the numpy fallback. Both backends take C-contiguous float64 arrays.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def _pick():
    want = os.environ.get("DLAB_BACKEND", "").strip().lower()
    if want:
        if want not in _BACKENDS:
            raise ImportError(f"DLAB_BACKEND={want!r} unavailable; have {sorted(_BACKENDS)}")
        return want
    return "cython" if "cython" in _BACKENDS else "python"


BACKEND = _pick()
_impl = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    return _BACKENDS[name]


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def mixture_eval(x, means, variances, weights, backend=None):
    impl = _impl if backend is None else _BACKENDS[backend]
    return impl.mixture_eval(_c(x), _c(means), _c(variances), _c(weights))


def softmax_affine_grad(x, W, b, label, backend=None):
    impl = _impl if backend is None else _BACKENDS[backend]
    return impl.softmax_affine_grad(_c(x), _c(W), _c(b), int(label))
