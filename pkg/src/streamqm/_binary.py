"""Little-endian binary helpers shared by the QMF1, QMAN and checkpoint formats."""
import struct
import zlib

import numpy as np

from .errors import FormatError

F64 = np.dtype("<f8")


def matrix_bytes(A):
    return np.asarray(A, dtype=F64).tobytes(order="F")


def crc32(*parts):
    crc = 0
    for part in parts:
        crc = zlib.crc32(part, crc)
    return crc & 0xFFFFFFFF


class Reader:
    """Cursor over an in-memory buffer that reports byte offsets on failure."""

    def __init__(self, buf, what):
        self.buf = memoryview(buf)
        self.pos = 0
        self.what = what

    def require(self, nbytes):
        """Fail early if a header announces more data than the buffer holds."""
        if nbytes > len(self.buf) - self.pos:
            raise FormatError(
                f"{self.what}: truncated, header announces {nbytes} bytes but {len(self.buf) - self.pos} remain",
                offset=self.pos,
            )

    def take(self, nbytes):
        end = self.pos + nbytes
        if end > len(self.buf):
            raise FormatError(
                f"{self.what}: truncated, needed {nbytes} bytes but {len(self.buf) - self.pos} remain",
                offset=self.pos,
            )
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def unpack(self, fmt):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def magic(self, expected):
        got = bytes(self.take(len(expected)))
        if got != expected:
            raise FormatError(f"{self.what}: expected magic {expected!r}, found {got!r}", offset=0)

    def version(self, supported):
        (ver,) = self.unpack("<H")
        if ver != supported:
            raise FormatError(f"{self.what}: unsupported version {ver}", offset=self.pos - 2)
        return ver

    def matrix(self, rows, cols):
        raw = self.take(8 * rows * cols)
        return np.frombuffer(raw, dtype=F64).reshape((rows, cols), order="F").astype(np.float64)

    def check_crc(self, start):
        payload = self.buf[start:self.pos]
        at = self.pos
        (stored,) = self.unpack("<I")
        if stored != crc32(payload):
            raise FormatError(f"{self.what}: CRC32 mismatch", offset=at)

    def expect_end(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what}: {len(self.buf) - self.pos} trailing bytes", offset=self.pos)
