"""
Little-endian readers and writers for the feature and checkpoint files.
"""

import struct
from typing import BinaryIO, Sequence

import numpy as np

from src.utils.errors import ParseError


class BinaryReader:
    """Cursor over an in-memory buffer; every failure reports the byte offset"""

    def __init__(self, data: bytes, source: str = "file"):
        self.data = data
        self.offset = 0
        self.source = source

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def at_end(self) -> bool:
        return self.offset >= len(self.data)

    def _take(self, count: int, what: str) -> bytes:
        if count > self.remaining:
            raise ParseError(f"{self.source}: truncated {what}, expected {count} bytes, "
                             f"{self.remaining} available", self.offset)
        chunk = self.data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def _unpack(self, fmt: str, what: str) -> int:
        return struct.unpack(fmt, self._take(struct.calcsize(fmt), what))[0]

    def u8(self, what: str) -> int:
        return self._unpack("<B", what)

    def u16(self, what: str) -> int:
        return self._unpack("<H", what)

    def u32(self, what: str) -> int:
        return self._unpack("<I", what)

    def magic(self, expected: bytes) -> None:
        start = self.offset
        found = self._take(len(expected), "magic")
        if found != expected:
            raise ParseError(f"{self.source}: bad magic {found!r}, expected {expected!r}", start)

    def text(self, length: int, what: str) -> str:
        start = self.offset
        raw = self._take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(f"{self.source}: {what} is not valid UTF-8", start) from None

    def array(self, dtype: str, shape: Sequence[int], what: str) -> np.ndarray:
        count = int(np.prod(shape)) if len(shape) else 1
        itemsize = np.dtype(dtype).itemsize
        raw = self._take(count * itemsize, what)
        return np.frombuffer(raw, dtype=dtype, count=count).reshape(tuple(shape)).copy()


class BinaryWriter:
    def __init__(self, handle: BinaryIO):
        self.handle = handle

    def raw(self, data: bytes) -> None:
        self.handle.write(data)

    def u8(self, value: int) -> None:
        self.handle.write(struct.pack("<B", value))

    def u16(self, value: int) -> None:
        self.handle.write(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self.handle.write(struct.pack("<I", value))

    def text(self, value: str) -> None:
        """u16 length followed by UTF-8 bytes"""
        encoded = value.encode("utf-8")
        self.u16(len(encoded))
        self.handle.write(encoded)

    def array(self, values: np.ndarray, dtype: str) -> None:
        self.handle.write(np.ascontiguousarray(values, dtype=dtype).tobytes())
