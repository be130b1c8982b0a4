"""Compiled versions of the loops in :mod:`streamqm._kernels`.

Imported lazily: loading numba costs ~100 MB of resident memory, which the
streaming path should not pay unless a kernel is actually used.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def quad_features_matrix(Z):
    n, M = Z.shape
    m = n * (n + 1) // 2
    out = np.empty((m, M))
    for col in range(M):
        row = 0
        for i in range(n):
            zi = Z[i, col]
            for j in range(i, n):
                out[row, col] = zi * Z[j, col]
                row += 1
    return out


@njit(cache=True)
def wave_rhs(rho, v1, v2, inv2dx, drho, dv1, dv2):
    g1, g2 = rho.shape
    for a in range(g1):
        ap = a + 1 if a + 1 < g1 else 0
        am = a - 1 if a > 0 else g1 - 1
        for b in range(g2):
            bp = b + 1 if b + 1 < g2 else 0
            bm = b - 1 if b > 0 else g2 - 1
            div = (v1[ap, b] - v1[am, b]) + (v2[a, bp] - v2[a, bm])
            drho[a, b] = -div * inv2dx
            dv1[a, b] = -(rho[ap, b] - rho[am, b]) * inv2dx
            dv2[a, b] = -(rho[a, bp] - rho[a, bm]) * inv2dx
