"""Single-line compressors (FPC, BDI, hybrid) and 2/4-line packing.

Codeword bodies are self-describing byte strings:

* FPC: sixteen 3-bit prefixes, then the per-word data fields, packed MSB-first
  and zero-padded to a byte boundary.
* BDI: one variant-id byte, the base, then one signed delta per value.
* RAW: the 64 line bytes verbatim.

A packed payload is one header byte per sub-line (2-bit algorithm id, 6-bit
body length) followed by the bodies, and must fit in 60 bytes.
"""

from __future__ import annotations

import enum
import functools
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

from .common import LINE_SIZE, PAYLOAD_BUDGET, DecodeError, Level, UsageError, check_line


class Algo(enum.IntEnum):
    RAW = 0
    FPC = 1
    BDI = 2


@dataclass(frozen=True)
class Codeword:
    algo: Algo
    body: bytes

    @property
    def size(self) -> int:
        return len(self.body)


# ---------------------------------------------------------------------------
# FPC

_WORDS = LINE_SIZE // 4
_PREFIX_BITS = 3
# prefix -> data bits
FPC_DATA_BITS = (0, 4, 8, 16, 16, 16, 8, 32)
# candidates tried in order; first match is the smallest encoding
_FPC_ORDER = (0, 1, 2, 6, 3, 4, 5, 7)


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def _fits(value: int, bits: int) -> bool:
    lim = 1 << (bits - 1)
    return -lim <= value < lim


def _fpc_match(prefix: int, w: int) -> Optional[int]:
    """Return the data field for word ``w`` under ``prefix`` or None."""
    s = _sext(w, 32)
    if prefix == 0:
        return 0 if w == 0 else None
    if prefix == 1:
        return s & 0xF if _fits(s, 4) else None
    if prefix == 2:
        return s & 0xFF if _fits(s, 8) else None
    if prefix == 3:
        return s & 0xFFFF if _fits(s, 16) else None
    if prefix == 4:
        return w >> 16 if w & 0xFFFF == 0 else None
    if prefix == 5:
        lo, hi = _sext(w & 0xFFFF, 16), _sext(w >> 16, 16)
        if _fits(lo, 8) and _fits(hi, 8):
            return ((hi & 0xFF) << 8) | (lo & 0xFF)
        return None
    if prefix == 6:
        b = w & 0xFF
        return b if w == b * 0x01010101 else None
    return w


def _fpc_expand(prefix: int, field: int) -> int:
    if prefix == 0:
        return 0
    if prefix in (1, 2, 3):
        return _sext(field, FPC_DATA_BITS[prefix]) & 0xFFFFFFFF
    if prefix == 4:
        return field << 16
    if prefix == 5:
        lo = _sext(field & 0xFF, 8) & 0xFFFF
        hi = _sext(field >> 8, 8) & 0xFFFF
        return (hi << 16) | lo
    if prefix == 6:
        return field * 0x01010101
    return field


def fpc_compress(line: bytes) -> Codeword:
    line = check_line(line)
    prefixes = []
    fields = []
    for w in struct.unpack("<16I", line):
        for p in _FPC_ORDER:
            f = _fpc_match(p, w)
            if f is not None:
                prefixes.append(p)
                fields.append(f)
                break
    acc = 0
    nbits = 0
    for p in prefixes:
        acc = (acc << _PREFIX_BITS) | p
        nbits += _PREFIX_BITS
    for p, f in zip(prefixes, fields):
        n = FPC_DATA_BITS[p]
        acc = (acc << n) | f
        nbits += n
    nbytes = (nbits + 7) // 8
    if nbytes >= LINE_SIZE:
        return Codeword(Algo.RAW, line)
    acc <<= nbytes * 8 - nbits
    return Codeword(Algo.FPC, acc.to_bytes(nbytes, "big"))


def fpc_decompress(cw: Codeword) -> bytes:
    if cw.algo == Algo.RAW:
        return _raw_decompress(cw)
    if cw.algo != Algo.FPC:
        raise DecodeError(f"not an FPC codeword: {cw.algo!r}")
    body = cw.body
    if len(body) < (_WORDS * _PREFIX_BITS + 7) // 8:
        raise DecodeError("FPC body shorter than its prefix block")
    acc = int.from_bytes(body, "big")
    total = len(body) * 8
    pos = total
    prefixes = []
    for _ in range(_WORDS):
        pos -= _PREFIX_BITS
        prefixes.append((acc >> pos) & 0b111)
    nbits = _WORDS * _PREFIX_BITS + sum(FPC_DATA_BITS[p] for p in prefixes)
    if (nbits + 7) // 8 != len(body):
        raise DecodeError(f"FPC body is {len(body)} bytes, prefixes describe {nbits} bits")
    words = []
    for p in prefixes:
        n = FPC_DATA_BITS[p]
        pos -= n
        words.append(_fpc_expand(p, (acc >> pos) & ((1 << n) - 1)))
    return struct.pack("<16I", *words)


# ---------------------------------------------------------------------------
# BDI

BDI_ZERO = 0
BDI_REPEAT = 1
# variant id -> (base bytes, delta bytes)
BDI_VARIANTS = {
    2: (8, 1),
    3: (8, 2),
    4: (8, 4),
    5: (4, 1),
    6: (4, 2),
    7: (2, 1),
}


def bdi_size(variant: int) -> int:
    if variant == BDI_ZERO:
        return 1
    if variant == BDI_REPEAT:
        return 9
    base, delta = BDI_VARIANTS[variant]
    return 1 + base + (LINE_SIZE // base) * delta


def _values(line: bytes, width: int) -> list[int]:
    return [int.from_bytes(line[i:i + width], "little") for i in range(0, LINE_SIZE, width)]


def _bdi_try(line: bytes, variant: int) -> Optional[bytes]:
    base_w, delta_w = BDI_VARIANTS[variant]
    vals = _values(line, base_w)
    base = vals[0]
    mod = 1 << (8 * base_w)
    out = bytearray([variant])
    out += base.to_bytes(base_w, "little")
    for v in vals:
        d = _sext((v - base) % mod, 8 * base_w)
        if not _fits(d, 8 * delta_w):
            return None
        out += (d & ((1 << (8 * delta_w)) - 1)).to_bytes(delta_w, "little")
    return bytes(out)


def bdi_compress(line: bytes) -> Codeword:
    line = check_line(line)
    if not any(line):
        return Codeword(Algo.BDI, bytes([BDI_ZERO]))
    if line == line[:8] * 8:
        return Codeword(Algo.BDI, bytes([BDI_REPEAT]) + line[:8])
    for variant in sorted(BDI_VARIANTS, key=lambda v: (bdi_size(v), v)):
        body = _bdi_try(line, variant)
        if body is not None:
            return Codeword(Algo.BDI, body)
    return Codeword(Algo.RAW, line)


def bdi_decompress(cw: Codeword) -> bytes:
    if cw.algo == Algo.RAW:
        return _raw_decompress(cw)
    if cw.algo != Algo.BDI:
        raise DecodeError(f"not a BDI codeword: {cw.algo!r}")
    body = cw.body
    if not body:
        raise DecodeError("empty BDI body")
    variant = body[0]
    if variant > 7:
        raise DecodeError(f"unknown BDI variant {variant}")
    if len(body) != bdi_size(variant):
        raise DecodeError(f"BDI variant {variant} needs {bdi_size(variant)} bytes, got {len(body)}")
    if variant == BDI_ZERO:
        return bytes(LINE_SIZE)
    if variant == BDI_REPEAT:
        return body[1:9] * 8
    base_w, delta_w = BDI_VARIANTS[variant]
    base = int.from_bytes(body[1:1 + base_w], "little")
    mod = 1 << (8 * base_w)
    out = bytearray()
    pos = 1 + base_w
    for _ in range(LINE_SIZE // base_w):
        d = _sext(int.from_bytes(body[pos:pos + delta_w], "little"), 8 * delta_w)
        out += ((base + d) % mod).to_bytes(base_w, "little")
        pos += delta_w
    return bytes(out)


# ---------------------------------------------------------------------------
# hybrid


def _raw_decompress(cw: Codeword) -> bytes:
    if len(cw.body) != LINE_SIZE:
        raise DecodeError(f"RAW body must be {LINE_SIZE} bytes, got {len(cw.body)}")
    return cw.body


@functools.lru_cache(maxsize=1 << 16)
def hybrid_compress(line: bytes) -> Codeword:
    """Smaller of the FPC and BDI encodings; FPC wins ties."""
    line = bytes(line)
    f = fpc_compress(line)
    b = bdi_compress(line)
    if f.algo == Algo.RAW and b.algo == Algo.RAW:
        return f
    if b.algo == Algo.RAW or (f.algo != Algo.RAW and f.size <= b.size):
        return f
    return b


def decompress(cw: Codeword) -> bytes:
    if cw.algo == Algo.FPC:
        return fpc_decompress(cw)
    if cw.algo == Algo.BDI:
        return bdi_decompress(cw)
    if cw.algo == Algo.RAW:
        return _raw_decompress(cw)
    raise DecodeError(f"unknown algorithm {cw.algo!r}")


# ---------------------------------------------------------------------------
# packing

_LEVEL_COUNT = {Level.X2: 2, Level.X4: 4}
_MAX_SUB_LEN = 60


@dataclass(frozen=True)
class PackedPayload:
    level: Level
    subs: tuple[Codeword, ...]

    def to_bytes(self) -> bytes:
        header = bytes((int(cw.algo) << 6) | cw.size for cw in self.subs)
        return header + b"".join(cw.body for cw in self.subs)

    @property
    def size(self) -> int:
        return len(self.subs) + sum(cw.size for cw in self.subs)

    @classmethod
    def from_bytes(cls, level: Level, data: bytes) -> "PackedPayload":
        """Parse a payload; trailing bytes past the last body are padding."""
        n = _count(level)
        if len(data) < n:
            raise DecodeError("payload shorter than its header")
        subs = []
        pos = n
        for h in data[:n]:
            algo, length = h >> 6, h & 0x3F
            if algo not in (Algo.FPC, Algo.BDI):
                raise DecodeError(f"bad algorithm id {algo} in packed header")
            if length > _MAX_SUB_LEN:
                raise DecodeError(f"sub-codeword length {length} exceeds {_MAX_SUB_LEN}")
            if pos + length > min(len(data), PAYLOAD_BUDGET):
                raise DecodeError("packed header overruns the payload")
            subs.append(Codeword(Algo(algo), bytes(data[pos:pos + length])))
            pos += length
        return cls(level, tuple(subs))


def _count(level: Level) -> int:
    try:
        return _LEVEL_COUNT[Level(level)]
    except (KeyError, ValueError):
        raise UsageError(f"packing level must be X2 or X4, got {level!r}") from None


def packed_size(lines: Sequence[bytes]) -> int:
    """Serialized payload size if ``lines`` were packed (may exceed the budget)."""
    return len(lines) + sum(hybrid_compress(bytes(l)).size for l in lines)


def pack_group(lines: Sequence[bytes], level: Level) -> Optional[PackedPayload]:
    n = _count(level)
    if len(lines) != n:
        raise UsageError(f"{Level(level).name} packing takes {n} lines, got {len(lines)}")
    subs = tuple(hybrid_compress(check_line(l)) for l in lines)
    if any(cw.algo == Algo.RAW for cw in subs):
        return None
    payload = PackedPayload(Level(level), subs)
    if payload.size > PAYLOAD_BUDGET:
        return None
    return payload


def unpack_group(p: PackedPayload) -> list[bytes]:
    if len(p.subs) != _count(p.level):
        raise DecodeError(f"{p.level.name} payload carries {len(p.subs)} sub-codewords")
    for cw in p.subs:
        if cw.algo == Algo.RAW or cw.size > _MAX_SUB_LEN:
            raise DecodeError("packed sub-codeword is not compressed")
    if p.size > PAYLOAD_BUDGET:
        raise DecodeError(f"payload is {p.size} bytes, budget is {PAYLOAD_BUDGET}")
    return [decompress(cw) for cw in p.subs]
