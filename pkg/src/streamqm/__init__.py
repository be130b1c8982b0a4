"""Streaming construction of quadratic manifolds from snapshot data.

Chunks of snapshots update a truncated SVD; a greedy selection of left
singular vectors plus a ridge fit of the quadratic weights is then computed
from the SVD factors alone.
"""
from .errors import (
    ArgumentError,
    ConfigurationError,
    FormatError,
    NumericError,
    StreamError,
    StreamQMError,
)
from .isvd import SvdState, init_from_chunk, orthogonality_defect, reorthonormalize, update
from .manifold import decode, encode, load_manifold, reconstruct, relative_error, save_manifold
from .qm import (
    GreedyConfig,
    QuadraticManifold,
    build_manifold,
    fit_weights,
    greedy_objective,
    greedy_select,
    linear_manifold,
    quad_features,
    quad_features_matrix,
    truncation_gap_bound,
)

__version__ = "0.1.0"
