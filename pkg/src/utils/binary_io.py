"""
Little-endian, versioned binary containers.

A container is an 8-byte magic, a u32 format version and a sequence of
fields. Scalars are fixed-width little-endian integers; arrays are written
as a u32 rank, one u64 per dimension, then the elements in row-major order.
Complex elements are stored as interleaved (re, im) f64 pairs.
"""

import struct
from typing import BinaryIO, Optional, Sequence, Tuple

import numpy as np

from utils.errors import CheckpointFormatError

F64 = np.dtype("<f8")
C128 = np.dtype("<c16")
I64 = np.dtype("<i8")


class BinaryWriter:
    """Sequential writer for a versioned container"""

    def __init__(self, stream: BinaryIO, magic: bytes, version: int):
        if len(magic) != 8:
            raise ValueError("magic must be exactly 8 bytes")
        self.stream = stream
        self.stream.write(magic)
        self.write_u32(version)

    def write_u8(self, value: int) -> None:
        self.stream.write(struct.pack("<B", value))

    def write_u32(self, *values: int) -> None:
        self.stream.write(struct.pack(f"<{len(values)}I", *values))

    def write_array(self, array: np.ndarray, dtype: np.dtype) -> None:
        """Write rank, shape and the elements converted to `dtype`"""
        data = np.ascontiguousarray(array, dtype=dtype)
        self.stream.write(struct.pack("<I", data.ndim))
        if data.ndim:
            self.stream.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        self.stream.write(data.tobytes(order="C"))


class BinaryReader:
    """Sequential reader mirroring BinaryWriter, with truncation checks"""

    def __init__(self, stream: BinaryIO, magic: bytes, version: int):
        self.stream = stream
        found = self._read(len(magic), "magic")
        if found != magic:
            raise CheckpointFormatError(
                f"Bad magic bytes {found!r}, expected {magic!r}"
            )
        (found_version,) = self.read_u32()
        if found_version != version:
            raise CheckpointFormatError(
                f"Unsupported format version {found_version}, expected {version}"
            )
        self.version = found_version

    def _read(self, size: int, what: str) -> bytes:
        data = self.stream.read(size)
        if len(data) != size:
            raise CheckpointFormatError(
                f"Truncated container while reading {what}: "
                f"wanted {size} bytes, got {len(data)}"
            )
        return data

    def read_u8(self) -> int:
        return struct.unpack("<B", self._read(1, "u8"))[0]

    def read_u32(self, count: int = 1) -> Tuple[int, ...]:
        return struct.unpack(f"<{count}I", self._read(4 * count, "u32"))

    def read_array(
        self, dtype: np.dtype, shape: Optional[Sequence[int]] = None
    ) -> np.ndarray:
        """Read one array; if `shape` is given the stored shape must match it"""
        (ndim,) = self.read_u32()
        dims: Tuple[int, ...] = ()
        if ndim:
            dims = struct.unpack(f"<{ndim}Q", self._read(8 * ndim, "shape"))
        if shape is not None and tuple(shape) != dims:
            raise CheckpointFormatError(
                f"Stored array shape {dims} does not match expected {tuple(shape)}"
            )
        count = int(np.prod(dims)) if dims else 1
        raw = self._read(count * dtype.itemsize, f"array{dims}")
        return np.frombuffer(raw, dtype=dtype).reshape(dims).astype(
            dtype.newbyteorder("="), copy=True
        )

    def expect_end(self) -> None:
        """Reject trailing bytes"""
        if self.stream.read(1):
            raise CheckpointFormatError("Unexpected trailing data after container")
