"""QMF1 chunk streams and SvdState checkpoints.

QMF1 block: ``b"QMF1"``, version u16, rows u64, cols u64, rows*cols float64
(little-endian, column-major), CRC32 of the float payload. A stream is a
concatenation of blocks, a directory of such files read in lexicographic
order, or standard input carrying the same framing.
"""
import os
import struct
import sys

import numpy as np

from ._binary import F64, Reader, crc32, matrix_bytes
from .errors import FormatError
from .isvd import SvdState

QMF_MAGIC = b"QMF1"
QMF_VERSION = 1
_QMF_HEADER = struct.Struct("<4sHQQ")

CKPT_MAGIC = b"QCKP"
CKPT_VERSION = 1


def write_block(fh, A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    payload = matrix_bytes(A)
    fh.write(_QMF_HEADER.pack(QMF_MAGIC, QMF_VERSION, A.shape[0], A.shape[1]))
    fh.write(payload)
    fh.write(struct.pack("<I", crc32(payload)))


def write_matrix(path, A):
    with open(path, "wb") as fh:
        write_block(fh, A)


def write_stream(path, chunks):
    with open(path, "wb") as fh:
        for C in chunks:
            write_block(fh, C)


# payloads above this size are read incrementally, so a corrupt header that
# announces a huge block fails on truncation instead of on allocation
_EAGER_READ_BYTES = 256 * 2**20


def _read_exact(fh, nbytes, offset, what):
    buf = bytearray(min(nbytes, _EAGER_READ_BYTES))
    got = 0
    while got < nbytes:
        if got == len(buf):
            buf.extend(bytes(min(nbytes - got, _EAGER_READ_BYTES)))
        n = fh.readinto(memoryview(buf)[got:])
        if not n:
            break
        got += n
    if got == 0:
        return None
    if got < nbytes:
        raise FormatError(f"{what}: truncated, needed {nbytes} bytes, got {got}", offset=offset + got)
    return buf


def iter_blocks(fh, name="<stream>"):
    """Yield each matrix of a concatenated QMF1 stream, reading it exactly once."""
    offset = 0
    while True:
        head = _read_exact(fh, _QMF_HEADER.size, offset, name)
        if head is None:
            return
        magic, version, rows, cols = _QMF_HEADER.unpack(head)
        if magic != QMF_MAGIC:
            raise FormatError(f"{name}: expected magic {QMF_MAGIC!r}, found {magic!r}", offset=offset)
        if version != QMF_VERSION:
            raise FormatError(f"{name}: unsupported QMF version {version}", offset=offset + 4)
        offset += _QMF_HEADER.size
        nbytes = 8 * rows * cols
        payload = _read_exact(fh, nbytes, offset, name) if nbytes else bytearray()
        if payload is None:
            raise FormatError(f"{name}: truncated, block payload missing", offset=offset)
        offset += nbytes
        tail = _read_exact(fh, 4, offset, name)
        if tail is None:
            raise FormatError(f"{name}: truncated, CRC32 missing", offset=offset)
        if struct.unpack("<I", tail)[0] != crc32(payload):
            raise FormatError(f"{name}: CRC32 mismatch", offset=offset)
        offset += 4
        yield np.frombuffer(payload, dtype=F64).reshape((rows, cols), order="F")


def read_matrix(path):
    """Read a QMF1 file holding one or more blocks as one horizontally stacked matrix."""
    with open(path, "rb") as fh:
        blocks = list(iter_blocks(fh, str(path)))
    if not blocks:
        raise FormatError(f"{path}: no QMF1 blocks", offset=0)
    if len({b.shape[0] for b in blocks}) != 1:
        raise FormatError(f"{path}: blocks disagree on the row dimension")
    return np.hstack(blocks).astype(np.float64)


def iter_source(source):
    """Yield matrices from a path, a directory of QMF1 files, or ``-`` for stdin."""
    if source == "-":
        yield from iter_blocks(sys.stdin.buffer, "<stdin>")
    elif os.path.isdir(source):
        for name in sorted(os.listdir(source)):
            path = os.path.join(source, name)
            if os.path.isfile(path):
                with open(path, "rb") as fh:
                    yield from iter_blocks(fh, path)
    else:
        with open(source, "rb") as fh:
            yield from iter_blocks(fh, str(source))


def state_to_bytes(state, chunks_processed=0, chunk_width=0):
    r = state.rank
    keep_v = state.V is not None
    parts = [
        struct.pack(
            "<8Q",
            state.n_rows,
            state.n_cols_seen,
            state.q_max,
            r,
            state.updates_since_reorth,
            chunks_processed,
            chunk_width,
            int(keep_v),
        ),
        matrix_bytes(state.sigma[None, :]),
        matrix_bytes(state.U),
    ]
    if keep_v:
        parts.append(matrix_bytes(state.V))
    body = b"".join(parts)
    return CKPT_MAGIC + struct.pack("<H", CKPT_VERSION) + body + struct.pack("<I", crc32(body))


def state_from_bytes(buf):
    rd = Reader(buf, "checkpoint")
    rd.magic(CKPT_MAGIC)
    rd.version(CKPT_VERSION)
    start = rd.pos
    n_rows, n_cols, q_max, r, since, chunks, width, keep_v = rd.unpack("<8Q")
    if keep_v > 1 or r > q_max:
        raise FormatError(f"checkpoint: inconsistent header (rank {r}, q {q_max}, keep_v {keep_v})", offset=start)
    rd.require(8 * r * (1 + n_rows + (n_cols if keep_v else 0)) + 4)
    sigma = rd.matrix(1, r)[0]
    U = rd.matrix(n_rows, r)
    V = rd.matrix(n_cols, r) if keep_v else None
    rd.check_crc(start)
    rd.expect_end()
    state = SvdState(U, sigma, V, n_rows, n_cols, q_max, since)
    return state, {"chunks_processed": chunks, "chunk_width": width}


def save_checkpoint(state, path, chunks_processed=0, chunk_width=0):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(state_to_bytes(state, chunks_processed, chunk_width))
    os.replace(tmp, path)


def load_checkpoint(path):
    """Return ``(state, meta)`` where meta holds ``chunks_processed`` and ``chunk_width``."""
    with open(path, "rb") as fh:
        return state_from_bytes(fh.read())
