"""Incrementally updated truncated SVD of a column-streamed data matrix.

Each chunk ``C`` (N x p) is absorbed by a thin QR of ``[U diag(sigma), C]``,
an SVD of the small triangular factor, and rotation of the old factors.
Only U (N x r), sigma and V (M_seen x r) are kept; no N x M_seen matrix is
ever formed.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .linalg import dense_svd, thin_qr

REORTH_EVERY = 32
REORTH_TOL = 1e-10
# singular values at or below this fraction of sigma[0] are treated as zero
DROP_RTOL = 1e-14


@dataclass
class SvdState:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray | None
    n_rows: int
    n_cols_seen: int
    q_max: int
    updates_since_reorth: int = 0

    @classmethod
    def empty(cls, n_rows, q_max, keep_v=True):
        if q_max < 1:
            raise ArgumentError(f"q_max must be >= 1, got {q_max}")
        V = np.zeros((0, 0)) if keep_v else None
        return cls(np.zeros((n_rows, 0)), np.zeros(0), V, int(n_rows), 0, int(q_max))

    @property
    def rank(self):
        return self.sigma.shape[0]

    @property
    def keeps_v(self):
        return self.V is not None

    def factors(self):
        if self.V is None:
            raise ArgumentError("right singular vectors were discarded for this stream")
        return self.U, self.sigma, self.V


def _check_chunk(state, C):
    C = np.asarray(C, dtype=np.float64)
    if C.ndim == 1:
        C = C[:, None]
    if C.ndim != 2 or C.shape[1] == 0:
        raise ArgumentError(f"chunk must be a non-empty N x p matrix, got shape {C.shape}")
    if C.shape[0] != state.n_rows:
        raise ArgumentError(f"chunk has {C.shape[0]} rows, stream has {state.n_rows}")
    if not np.all(np.isfinite(C)):
        raise ArgumentError("chunk contains non-finite entries")
    return C


def _n_keep(sigma, q_max):
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    nonzero = int(np.count_nonzero(sigma > DROP_RTOL * sigma[0]))
    return min(q_max, nonzero)


def init_from_chunk(C, q_max, keep_v=True):
    """Truncated SVD of the first chunk (rank ``min(q_max, rank(C))``)."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim == 1:
        C = C[:, None]
    if C.ndim != 2 or C.size == 0:
        raise ArgumentError(f"first chunk must be a non-empty matrix, got shape {C.shape}")
    return update(SvdState.empty(C.shape[0], q_max, keep_v), C)


def update(state, C):
    """Absorb chunk ``C`` and return the new state (``state`` is not modified)."""
    C = _check_chunk(state, C)
    N = state.n_rows
    r = state.rank
    p = C.shape[1]

    K = np.empty((N, r + p), order="F")
    np.multiply(state.U, state.sigma, out=K[:, :r])
    K[:, r:] = C
    if r + p <= N:
        Q, R = thin_qr(K, overwrite=True)
        del K
    else:
        # fewer rows than columns: the QR step is the identity
        Q, R = None, K
    GU, s, GV = dense_svd(R)
    keep = _n_keep(s, state.q_max)

    U = GU[:, :keep] if Q is None else Q @ GU[:, :keep]
    V = None
    if state.V is not None:
        # [[V, 0], [0, I_p]] @ GV without forming the block matrix
        V = np.vstack([state.V @ GV[:r, :keep], GV[r:, :keep]])
    new = SvdState(
        U=U,
        sigma=s[:keep].copy(),
        V=V,
        n_rows=N,
        n_cols_seen=state.n_cols_seen + p,
        q_max=state.q_max,
        updates_since_reorth=state.updates_since_reorth + 1,
    )
    if new.updates_since_reorth >= REORTH_EVERY:
        if orthogonality_defect(new) > REORTH_TOL:
            new = reorthonormalize(new)
        new.updates_since_reorth = 0
    return new


def orthogonality_defect(state):
    """``max(|U^T U - I|_max, |V^T V - I|_max)``."""
    r = state.rank
    if r == 0:
        return 0.0
    eye = np.eye(r)
    defect = float(np.max(np.abs(state.U.T @ state.U - eye)))
    if state.V is not None:
        defect = max(defect, float(np.max(np.abs(state.V.T @ state.V - eye))))
    return defect


def reorthonormalize(state):
    """Restore orthonormal factors while keeping ``U diag(sigma) V^T`` fixed."""
    r = state.rank
    if r == 0:
        return state
    Qu, Ru = thin_qr(state.U)
    core = Ru * state.sigma
    if state.V is not None:
        Qv, Rv = thin_qr(state.V)
        core = core @ Rv.T
    Gu, s, Gv = dense_svd(core)
    # core is near-diagonal; keep Gu near +I so a clean state is a fixed point
    flip = np.where(np.diag(Gu) < 0.0, -1.0, 1.0)
    Gu *= flip
    Gv *= flip
    V = None if state.V is None else Qv @ Gv
    return SvdState(
        U=Qu @ Gu,
        sigma=s,
        V=V,
        n_rows=state.n_rows,
        n_cols_seen=state.n_cols_seen,
        q_max=state.q_max,
        updates_since_reorth=state.updates_since_reorth,
    )
