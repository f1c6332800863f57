"""Shared constants, enums and exceptions."""

from __future__ import annotations

import enum

LINE_SIZE = 64
GROUP_SIZE = 4
PAYLOAD_BUDGET = 60
ZERO_LINE = bytes(LINE_SIZE)


class Level(enum.IntEnum):
    """Compression level of a slot (also the 2-bit prior-compressibility tag)."""

    UNCOMP = 0
    X2 = 1
    X4 = 2


class CramError(Exception):
    """Base class for simulator errors."""


class DecodeError(CramError, ValueError):
    """Raised when a codeword or packed payload is malformed."""


class UsageError(CramError, ValueError):
    """Raised on a caller contract violation (wrong line count, bad state)."""


class IntegrityError(CramError, AssertionError):
    """A simulator state-machine fault; never expected in a correct run."""


def invert(data: bytes) -> bytes:
    """Bitwise complement of a byte string."""
    n = len(data)
    return (int.from_bytes(data, "little") ^ ((1 << (8 * n)) - 1)).to_bytes(n, "little")


def check_line(line: bytes) -> bytes:
    if len(line) != LINE_SIZE:
        raise UsageError(f"line must be {LINE_SIZE} bytes, got {len(line)}")
    return bytes(line)
