"""Hot inner loops, each with a numba path and a pure-numpy path.

The numba path is used when numba is importable and ``STREAMQM_NUMBA`` is not
set to ``0``/``false``/``off``. Both paths are always importable so tests and
the benchmark can compare them directly (``*_numpy`` / ``*_numba``).
"""
import logging
import os

import numpy as np

log = logging.getLogger(__name__)

_DISABLED = ("0", "false", "no", "off")
_compiled = None


def numba_requested():
    return os.environ.get("STREAMQM_NUMBA", "1").strip().lower() not in _DISABLED


def _load_numba():
    global _compiled
    if _compiled is None:
        try:
            from . import _numba_kernels
        except ImportError as exc:  # pragma: no cover - depends on environment
            log.warning("numba unavailable (%s); using numpy kernels", exc)
            _compiled = False
        else:
            _compiled = _numba_kernels
    return _compiled


def backend():
    """Name of the backend the dispatching functions will use."""
    if numba_requested() and _load_numba():
        return "numba"
    return "numpy"


def quad_features_matrix_numpy(Z):
    n = Z.shape[0]
    i, j = np.triu_indices(n)
    return Z[i] * Z[j]


def quad_features_matrix_numba(Z):
    return _load_numba().quad_features_matrix(np.ascontiguousarray(Z, dtype=np.float64))


def quad_features_matrix(Z):
    if Z.shape[0] == 0:
        return np.zeros((0, Z.shape[1]))
    if backend() == "numba":
        return quad_features_matrix_numba(Z)
    return quad_features_matrix_numpy(Z)


def wave_rhs_numpy(rho, v1, v2, inv2dx):
    # axis 0 is x1, axis 1 is x2; periodic central differences
    d1v1 = np.roll(v1, -1, axis=0) - np.roll(v1, 1, axis=0)
    d2v2 = np.roll(v2, -1, axis=1) - np.roll(v2, 1, axis=1)
    drho = -(d1v1 + d2v2) * inv2dx
    dv1 = -(np.roll(rho, -1, axis=0) - np.roll(rho, 1, axis=0)) * inv2dx
    dv2 = -(np.roll(rho, -1, axis=1) - np.roll(rho, 1, axis=1)) * inv2dx
    return drho, dv1, dv2


def wave_rhs_numba(rho, v1, v2, inv2dx):
    drho = np.empty_like(rho)
    dv1 = np.empty_like(rho)
    dv2 = np.empty_like(rho)
    _load_numba().wave_rhs(rho, v1, v2, inv2dx, drho, dv1, dv2)
    return drho, dv1, dv2


def wave_rhs(rho, v1, v2, inv2dx):
    if backend() == "numba":
        return wave_rhs_numba(rho, v1, v2, inv2dx)
    return wave_rhs_numpy(rho, v1, v2, inv2dx)
