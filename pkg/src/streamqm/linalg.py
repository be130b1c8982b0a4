"""Small dense factorizations used by the incremental SVD and the ridge fits.

All routines work in float64. Inputs are validated for finiteness because a
single NaN in a chunk would otherwise silently poison every later update.
"""
import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import ArgumentError, NumericError


def _as_finite_matrix(A, name):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return A


def thin_qr(A, overwrite=False):
    """Economic QR ``A = Q R`` of a tall matrix with ``diag(R) >= 0``.

    The sign normalization makes the factors unique for full-rank ``A`` so
    that reruns and resumed streams reproduce the same bits. ``overwrite``
    lets LAPACK reuse ``A``'s storage.
    """
    A = _as_finite_matrix(A, "A")
    N, c = A.shape
    if c > N:
        raise ArgumentError(f"thin_qr needs cols <= rows, got {N}x{c}")
    if c == 0:
        return np.zeros((N, 0)), np.zeros((0, 0))
    Q, R = scipy.linalg.qr(A, mode="economic", overwrite_a=overwrite, check_finite=False)
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    Q *= signs
    R *= signs[:, None]
    return Q, R


def dense_svd(A):
    """Thin SVD, returning ``(U, sigma, V)`` with ``A = U diag(sigma) V^T``."""
    A = _as_finite_matrix(A, "A")
    a, b = A.shape
    if a == 0 or b == 0:
        return np.zeros((a, 0)), np.zeros(0), np.zeros((b, 0))
    U, sigma, Vt = np.linalg.svd(A, full_matrices=False)
    return U, sigma, Vt.T


def cholesky(A):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NumericError with the 0-based index of the failing pivot.
    """
    A = _as_finite_matrix(A, "A")
    m = A.shape[0]
    if A.shape != (m, m):
        raise ArgumentError(f"matrix must be square, got {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if m else 1.0
    if m and np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ArgumentError("matrix is not symmetric")
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NumericError(
            f"matrix is not positive definite (pivot {info - 1} of {m})",
            pivot=info - 1,
        )
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ArgumentError(f"dpotrf: illegal argument {-info}")
    return L


def spd_solve(A, B):
    """Solve ``A X = B`` for symmetric positive definite ``A`` via Cholesky."""
    L = cholesky(A)
    B = np.asarray(B, dtype=np.float64)
    vector = B.ndim == 1
    B2 = B[:, None] if vector else B
    if B2.shape[0] != L.shape[0]:
        raise ArgumentError(f"rhs has {B2.shape[0]} rows, matrix is {L.shape[0]}x{L.shape[0]}")
    if B2.shape[1] == 0 or L.shape[0] == 0:
        X = np.zeros(B2.shape)
    else:
        X, info = lapack.dpotrs(L, B2, lower=1)
        if info != 0:  # pragma: no cover
            raise NumericError(f"dpotrs failed with info={info}")
    return X[:, 0] if vector else X
