"""Encoder/decoder application, error metric and the ``.qman`` file format."""
import os
import struct

import numpy as np

from ._binary import Reader, crc32, matrix_bytes
from .errors import ArgumentError, FormatError
from .qm import QuadraticManifold, quad_features, quad_features_matrix

MAGIC = b"QMAN"
VERSION = 1


def _vector(x, size, name):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (size,):
        raise ArgumentError(f"{name} must have shape ({size},), got {x.shape}")
    return x


def encode(man, x):
    """Reduced coordinates ``V_lin^T x``."""
    return man.V_lin.T @ _vector(x, man.n_rows, "x")


def decode(man, z):
    """Point on the manifold ``V_lin z + W h(z)``."""
    z = _vector(z, man.n, "z")
    return man.V_lin @ z + man.W @ quad_features(z)


def reconstruct(man, X):
    """Column-wise ``decode(encode(x))``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != man.n_rows:
        raise ArgumentError(f"expected a {man.n_rows} x M matrix, got shape {X.shape}")
    Z = man.V_lin.T @ X
    return man.V_lin @ Z + man.W @ quad_features_matrix(Z)


def relative_error(X_hat, X):
    """Squared relative Frobenius error ``|X_hat - X|_F^2 / |X|_F^2``."""
    X_hat = np.asarray(X_hat, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X_hat.shape != X.shape:
        raise ArgumentError(f"shape mismatch: {X_hat.shape} vs {X.shape}")
    ref = float(np.sum(X * X))
    if ref == 0.0:
        raise ArgumentError("reference matrix is zero")
    return float(np.sum((X_hat - X) ** 2)) / ref


def manifold_to_bytes(man):
    N, n, m = man.n_rows, man.n, man.feature_dim
    body = b"".join([
        struct.pack("<QQQd", N, n, m, man.gamma),
        struct.pack(f"<{n}Q", *man.selected),
        matrix_bytes(man.V_lin),
        matrix_bytes(man.W),
    ])
    return MAGIC + struct.pack("<H", VERSION) + body + struct.pack("<I", crc32(body))


def manifold_from_bytes(buf):
    rd = Reader(buf, "manifold file")
    rd.magic(MAGIC)
    rd.version(VERSION)
    start = rd.pos
    N, n, m, gamma = rd.unpack("<QQQd")
    if m != n * (n + 1) // 2:
        raise FormatError(f"manifold file: feature dimension {m} does not match n={n}", offset=start + 16)
    rd.require(8 * (n + N * (n + m)) + 4)
    selected = rd.unpack(f"<{n}Q")
    V_lin = rd.matrix(N, n)
    W = rd.matrix(N, m)
    rd.check_crc(start)
    rd.expect_end()
    return QuadraticManifold(selected, V_lin, W, gamma)


def save_manifold(man, path):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(manifold_to_bytes(man))
    os.replace(tmp, path)


def load_manifold(path):
    with open(path, "rb") as fh:
        return manifold_from_bytes(fh.read())
