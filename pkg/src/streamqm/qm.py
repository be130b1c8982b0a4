"""Greedy quadratic-manifold construction from (truncated) SVD factors.

Everything here works on ``U`` (N x r), ``sigma`` (r,) and ``V`` (M x r) and
never assembles the N x M data matrix. With ``Z = diag(sigma) V^T`` the
reduced coordinates of the data in the selected directions are ``Z[in_set]``,
and the part of the data left for the quadratic term to explain is
``U_T diag(sigma_T) V_T^T`` for the unselected indices ``T``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ArgumentError
from .linalg import spd_solve

log = logging.getLogger(__name__)

# bytes of candidate feature rows materialized at once in greedy_select
_CANDIDATE_BATCH_BYTES = 32 * 2**20


@dataclass(frozen=True)
class GreedyConfig:
    n: int
    q: int
    gamma: float
    candidate_policy: str = "all-q"

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError(f"reduced dimension n must be >= 1, got {self.n}")
        if self.q < self.n:
            raise ArgumentError(f"truncation dimension q={self.q} is smaller than n={self.n}")
        if not self.gamma > 0.0:
            raise ArgumentError(f"gamma must be > 0, got {self.gamma}")
        if self.candidate_policy != "all-q":
            raise ArgumentError(f"unknown candidate policy {self.candidate_policy!r}")

    @classmethod
    def with_default_q(cls, n, gamma):
        return cls(n=n, q=10 * n, gamma=gamma)


@dataclass(frozen=True, eq=False)
class QuadraticManifold:
    """Decoder ``z -> V_lin z + W h(z)`` with encoder ``x -> V_lin^T x``."""

    selected: tuple
    V_lin: np.ndarray
    W: np.ndarray
    gamma: float
    feature_dim: int = field(init=False)

    def __post_init__(self):
        n = self.V_lin.shape[1]
        m = n * (n + 1) // 2
        object.__setattr__(self, "feature_dim", m)
        object.__setattr__(self, "selected", tuple(int(j) for j in self.selected))
        if len(self.selected) != n:
            raise ArgumentError(f"{len(self.selected)} indices for {n} basis vectors")
        if len(set(self.selected)) != n:
            raise ArgumentError(f"selected indices are not distinct: {self.selected}")
        if self.W.shape != (self.V_lin.shape[0], m):
            raise ArgumentError(f"W has shape {self.W.shape}, expected {(self.V_lin.shape[0], m)}")

    @property
    def n(self):
        return self.V_lin.shape[1]

    @property
    def n_rows(self):
        return self.V_lin.shape[0]


def quad_features(z):
    """Condensed Kronecker features ``[z1 z1, z1 z2, ..., z1 zn, z2 z2, ..., zn zn]``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ArgumentError(f"expected a vector, got shape {z.shape}")
    return quad_features_matrix(z[:, None])[:, 0]


def quad_features_matrix(Z):
    """Column-wise :func:`quad_features` of an n x M matrix."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ArgumentError(f"expected an n x M matrix, got shape {Z.shape}")
    return _kernels.quad_features_matrix(Z)


def _check_factors(U, sigma, V):
    sigma = np.asarray(sigma, dtype=np.float64)
    r = sigma.shape[0]
    if V.shape[1] != r or (U is not None and U.shape[1] != r):
        raise ArgumentError(
            f"inconsistent factor shapes U={None if U is None else U.shape}, "
            f"sigma={sigma.shape}, V={V.shape}"
        )
    return sigma


def _check_index_set(idx, r, name="in_set"):
    idx = [int(j) for j in idx]
    if len(set(idx)) != len(idx):
        raise ArgumentError(f"{name} has duplicate indices: {idx}")
    for j in idx:
        if not 0 <= j < r:
            raise ArgumentError(f"{name} index {j} out of range for rank {r}")
    return idx


def _complement(idx, r):
    mask = np.ones(r, dtype=bool)
    mask[list(idx)] = False
    return np.flatnonzero(mask)


def _check_gamma(gamma):
    if not gamma > 0.0:
        raise ArgumentError(f"gamma must be > 0, got {gamma}")


def fit_weights(U, sigma, V, in_set, gamma):
    """Ridge fit of W so that ``W h(Z_in)`` reproduces the unselected part of the data.

    Minimizes ``|W H - A|_F^2 + gamma |W|_F^2`` with ``A = U_T S_T V_T^T`` (the
    projection residual ``S - P S``) and ``H = h(S_in V_in^T)``. The minimizer
    is ``W = U_T X^T`` where ``(H H^T + gamma I) X = H V_T S_T``.
    """
    _check_gamma(gamma)
    sigma = _check_factors(U, sigma, V)
    r = sigma.shape[0]
    I = _check_index_set(in_set, r)
    T = _complement(I, r)
    H = quad_features_matrix(sigma[I, None] * V[:, I].T)
    G = H @ H.T
    G[np.diag_indices_from(G)] += gamma
    B = H @ (V[:, T] * sigma[T])
    X = spd_solve(G, B)
    return U[:, T] @ X.T


def greedy_objective(U, sigma, V, in_set, j, gamma, explicit=False):
    """Optimal ridge objective after adding candidate ``j`` to ``in_set``.

    Evaluated in closed form as ``sum(sigma_T'^2) - tr(B^T (H H^T + gamma I)^-1 B)``
    over the remaining indices ``T'``. ``explicit=True`` instead fits W and
    evaluates the residual on the assembled N x M matrix (debug/oracle only).
    """
    _check_gamma(gamma)
    sigma = _check_factors(U, sigma, V)
    r = sigma.shape[0]
    I = _check_index_set(in_set, r)
    j = int(j)
    if j in I:
        raise ArgumentError(f"candidate {j} is already selected")
    if not 0 <= j < r:
        raise ArgumentError(f"candidate {j} out of range for rank {r}")
    aug = I + [j]
    T = _complement(aug, r)
    H = quad_features_matrix(sigma[aug, None] * V[:, aug].T)
    if explicit:
        W = fit_weights(U, sigma, V, aug, gamma)
        A = (U[:, T] * sigma[T]) @ V[:, T].T
        return float(np.sum((W @ H - A) ** 2) + gamma * np.sum(W**2))
    G = H @ H.T
    G[np.diag_indices_from(G)] += gamma
    B = H @ (V[:, T] * sigma[T])
    X = spd_solve(G, B)
    return float(np.sum(sigma[T] ** 2) - np.sum(B * X))


class GreedyCache:
    """Gamma-independent Gram blocks keyed by the ordered selected set.

    A gamma sweep re-runs the greedy selection per gamma; while the selected
    prefixes agree, the feature products can be reused.
    """

    def __init__(self):
        self._blocks = {}
        self.hits = 0

    def get(self, key, build):
        if key in self._blocks:
            self.hits += 1
        else:
            self._blocks[key] = build()
        return self._blocks[key]


def _candidate_blocks(Z, I, candidates):
    """Gram and cross products for every candidate augmentation of ``I``.

    Feature rows for ``I + [j]`` are ordered as ``[h(Z_I); Z_j * Z_{I+[j]}]``;
    the objective is invariant to this row permutation.
    """
    r, M = Z.shape
    i = len(I)
    H0 = quad_features_matrix(Z[I]) if i else np.zeros((0, M))
    G0 = H0 @ H0.T
    Y0 = H0 @ Z.T
    c = len(candidates)
    cross = np.empty((c, H0.shape[0], i + 1))
    D = np.empty((c, i + 1, i + 1))
    YE = np.empty((c, i + 1, r))
    batch = max(1, _CANDIDATE_BATCH_BYTES // (8 * (i + 1) * max(M, 1)))
    for start in range(0, c, batch):
        js = candidates[start:start + batch]
        E = np.empty((len(js), i + 1, M))
        E[:, :i, :] = Z[js][:, None, :] * Z[I][None, :, :]
        E[:, i, :] = Z[js] ** 2
        flat = E.reshape(-1, M)
        sl = slice(start, start + len(js))
        cross[sl] = (H0 @ flat.T).reshape(H0.shape[0], len(js), i + 1).transpose(1, 0, 2)
        D[sl] = E @ E.transpose(0, 2, 1)
        YE[sl] = (flat @ Z.T).reshape(len(js), i + 1, r)
    return G0, Y0, cross, D, YE


def candidate_objectives(sigma, V, in_set, gamma, cache=None, Z=None):
    """Greedy objective for every admissible candidate, batched.

    Returns ``(candidates, values)``. Agrees with :func:`greedy_objective`
    evaluated one candidate at a time.
    """
    _check_gamma(gamma)
    sigma = _check_factors(None, sigma, V)
    r = sigma.shape[0]
    I = _check_index_set(in_set, r)
    if Z is None:
        Z = sigma[:, None] * V.T
    chosen = set(I)
    candidates = [j for j in range(r) if j not in chosen]
    build = lambda: _candidate_blocks(Z, I, candidates)  # noqa: E731
    G0, Y0, cross, D, YE = cache.get(tuple(I), build) if cache is not None else build()
    m0 = G0.shape[0]
    i = len(I)
    m = m0 + i + 1
    sq = sigma**2
    values = np.empty(len(candidates))
    G = np.empty((m, m))
    G[:m0, :m0] = G0
    for k, j in enumerate(candidates):
        G[:m0, m0:] = cross[k]
        G[m0:, :m0] = cross[k].T
        G[m0:, m0:] = D[k]
        Gk = G.copy()
        Gk[np.diag_indices(m)] += gamma
        T = _complement(I + [j], r)
        B = np.vstack([Y0[:, T], YE[k][:, T]])
        X = spd_solve(Gk, B)
        values[k] = np.sum(sq[T]) - np.sum(B * X)
    return candidates, values


def greedy_select(U, sigma, V, config, cache=None):
    """Indices ``(j_1, ..., j_n)`` chosen greedily among the first ``config.q`` vectors.

    Each step takes the candidate with the smallest objective; exact ties go
    to the smaller index.
    """
    sigma = _check_factors(U, sigma, V)
    r = min(sigma.shape[0], config.q)
    if r < config.n:
        raise ArgumentError(f"rank {r} is smaller than the reduced dimension n={config.n}")
    sigma = sigma[:r]
    V = V[:, :r]
    Z = sigma[:, None] * V.T
    selected = []
    for _ in range(config.n):
        candidates, values = candidate_objectives(sigma, V, selected, config.gamma, cache, Z)
        k = int(np.argmin(values))
        j = candidates[k]
        if sigma[j] == 0.0:
            log.info("greedy step %d selected index %d with zero singular value", len(selected), j)
        selected.append(j)
    return selected


def build_manifold(U, sigma, V, config, cache=None, selected=None):
    """Greedy selection followed by the ridge fit of W on the truncated factors.

    Passing ``selected`` skips the selection (used to reuse one selection
    across a gamma sweep).
    """
    sigma = _check_factors(U, sigma, V)
    r = min(sigma.shape[0], config.q)
    U, sigma, V = U[:, :r], sigma[:r], V[:, :r]
    if selected is None:
        selected = greedy_select(U, sigma, V, config, cache)
    W = fit_weights(U, sigma, V, selected, config.gamma)
    return QuadraticManifold(tuple(selected), U[:, list(selected)].copy(), W, config.gamma)


def linear_manifold(U, n):
    """Leading-``n`` linear basis with ``W = 0``."""
    if U.shape[1] < n:
        raise ArgumentError(f"rank {U.shape[1]} is smaller than n={n}")
    m = n * (n + 1) // 2
    return QuadraticManifold(tuple(range(n)), U[:, :n].copy(), np.zeros((U.shape[0], m)), 0.0)


def truncation_gap_bound(sigma, V, in_set, trunc_set, gamma):
    """Upper bound on ``|W_full - W_trunc|_F`` from discarding singular values.

    ``alpha * |sigma_discarded|_2`` with
    ``alpha = s_max(H) / s_min(H H^T + gamma I)``, ``H = h(S_in V_in^T)``;
    the discarded values are those of ``sigma`` outside ``in_set`` and
    ``trunc_set``.
    """
    _check_gamma(gamma)
    sigma = np.asarray(sigma, dtype=np.float64)
    r_full = sigma.shape[0]
    I = _check_index_set(in_set, r_full)
    Tr = _check_index_set(trunc_set, r_full, "trunc_set")
    if set(I) & set(Tr):
        raise ArgumentError(f"in_set and trunc_set overlap: {sorted(set(I) & set(Tr))}")
    if max(I, default=-1) >= V.shape[1]:
        raise ArgumentError("V does not hold the right singular vectors of in_set")
    discarded = _complement(I + Tr, r_full)
    tail = float(np.linalg.norm(sigma[discarded]))
    if tail == 0.0:
        return 0.0
    H = quad_features_matrix(sigma[I, None] * V[:, I].T)
    G = H @ H.T
    G[np.diag_indices_from(G)] += gamma
    s_max = float(np.linalg.norm(H, 2)) if H.size else 0.0
    lam_min = float(np.linalg.eigvalsh(G)[0])
    return s_max / lam_min * tail
