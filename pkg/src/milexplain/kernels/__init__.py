"""Hot-loop kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it imports; set ``MILEXPLAIN_PURE=1`` to
force the NumPy implementations. ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _pykernels

_compiled = None
if os.environ.get("MILEXPLAIN_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "numpy"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def lstm_forward(x, W, U, b):
    return _impl.lstm_forward(_c(x), _c(W), _c(U), _c(b))


def lstm_backward(dh, x, W, U, h, c, gates):
    return _impl.lstm_backward(_c(dh), _c(x), _c(W), _c(U), _c(h), _c(c), _c(gates))


def crf_forward_backward(em, trans, start, stop):
    return _impl.crf_forward_backward(_c(em), _c(trans), _c(start), _c(stop))


def crf_log_partition(em, trans, start, stop):
    return float(_impl.crf_log_partition(_c(em), _c(trans), _c(start), _c(stop)))


def viterbi(em, trans, start, stop):
    path, score = _impl.viterbi(_c(em), _c(trans), _c(start), _c(stop))
    return np.asarray(path, dtype=np.int64), float(score)


def backends():
    """Available kernel modules keyed by name (used by tests and benchmarks)."""
    out = {"numpy": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _ckernels
            out["cython"] = _ckernels
        except ImportError:
            pass
    return out
