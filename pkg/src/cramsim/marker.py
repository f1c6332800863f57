"""Implicit metadata: per-line markers, slot classification and line inversion.

A compressed slot ends in the 2:1 or 4:1 marker of its address. Slots vacated
by packing hold the 64-byte invalid-line marker. Uncompressed data that would
be mistaken for either is stored inverted and its address recorded in the
Line Inversion Table (LIT).
"""

from __future__ import annotations

import enum
import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .common import LINE_SIZE, PAYLOAD_BUDGET, CramError, UsageError, invert

FIXED_M2 = 0x22222222
FIXED_M4 = 0x44444444
LIT_ENTRIES = 16


class MarkerMode(str, enum.Enum):
    PERLINE = "perline"
    FIXED = "fixed"


class OverflowMode(str, enum.Enum):
    MEMORY_MAPPED = "mmap"
    REKEY = "rekey"


class Kind(enum.Enum):
    COMPRESSED_X2 = "x2"
    COMPRESSED_X4 = "x4"
    INVALID_SLOT = "invalid"
    UNCOMPRESSED = "uncompressed"


class LitOverflow(CramError):
    """The on-chip LIT is full and the overflow mode requires a rekey."""


def _prf(key: int, label: bytes, size: int) -> bytes:
    return hashlib.blake2b(label, key=key.to_bytes(16, "little"), digest_size=size).digest()


@dataclass(frozen=True)
class MarkerSet:
    m2: int
    m4: int
    m_il: bytes
    bits: int = 32

    def __post_init__(self):
        w = self.bits // 8
        object.__setattr__(self, "m2_bytes", self.m2.to_bytes(w, "little"))
        object.__setattr__(self, "m4_bytes", self.m4.to_bytes(w, "little"))
        object.__setattr__(self, "m2_inv", invert(self.m2_bytes))
        object.__setattr__(self, "m4_inv", invert(self.m4_bytes))
        object.__setattr__(self, "m_il_inv", invert(self.m_il))

    @property
    def width(self) -> int:
        return self.bits // 8

    def is_consistent(self) -> bool:
        mask = (1 << self.bits) - 1
        four = {self.m2, self.m4, self.m2 ^ mask, self.m4 ^ mask}
        il_tail = int.from_bytes(self.m_il[-self.width:], "little")
        return len(four) == 4 and il_tail not in four and len(self.m_il) == LINE_SIZE


def _global_il(key: int, bits: int, avoid: Optional[tuple[int, int]] = None) -> bytes:
    mask = (1 << bits) - 1
    w = bits // 8
    for tweak in itertools.count():
        m_il = _prf(key, b"marker-il" + tweak.to_bytes(4, "little"), LINE_SIZE)
        if avoid is None:
            return m_il
        tail = int.from_bytes(m_il[-w:], "little")
        if tail not in {avoid[0], avoid[1], avoid[0] ^ mask, avoid[1] ^ mask}:
            return m_il
    raise AssertionError("unreachable")


def gen_markers(
    key: int,
    line_addr: int,
    *,
    mode: MarkerMode = MarkerMode.PERLINE,
    bits: int = 32,
    il_perline: bool = False,
    m_il: Optional[bytes] = None,
) -> MarkerSet:
    """Derive the marker set of one line address from a 128-bit key.

    ``m_il`` may be passed in to avoid recomputing the global invalid-line
    marker for every address.
    """
    if bits not in (8, 32):
        raise UsageError(f"marker width must be 8 or 32 bits, got {bits}")
    mask = (1 << bits) - 1
    if mode == MarkerMode.FIXED:
        fixed = (FIXED_M2 & mask, FIXED_M4 & mask)
        if m_il is None or il_perline:
            label_key = key if not il_perline else key ^ line_addr
            m_il = _global_il(label_key, bits, avoid=fixed)
        return MarkerSet(fixed[0], fixed[1], m_il, bits)
    if m_il is None and not il_perline:
        m_il = _global_il(key, bits)
    addr = line_addr.to_bytes(8, "little")
    for tweak in itertools.count():
        t = tweak.to_bytes(4, "little")
        d = _prf(key, b"marker" + addr + t, 8)
        m2 = int.from_bytes(d[:4], "little") & mask
        m4 = int.from_bytes(d[4:], "little") & mask
        il = _prf(key, b"marker-il" + addr + t, LINE_SIZE) if il_perline else m_il
        ms = MarkerSet(m2, m4, il, bits)
        if ms.is_consistent():
            return ms
    raise AssertionError("unreachable")


class MarkerGen:
    """Memoizing marker source bound to one key and configuration."""

    def __init__(self, key: int, mode: MarkerMode = MarkerMode.PERLINE, bits: int = 32,
                 il_perline: bool = False):
        self.key = key
        self.mode = MarkerMode(mode)
        self.bits = bits
        self.il_perline = il_perline
        self._m_il = None if il_perline else _global_il(key, bits)
        if self.mode == MarkerMode.FIXED and not il_perline:
            mask = (1 << bits) - 1
            self._m_il = _global_il(key, bits, avoid=(FIXED_M2 & mask, FIXED_M4 & mask))
        self._cache: dict[int, MarkerSet] = {}

    def __call__(self, line_addr: int) -> MarkerSet:
        ms = self._cache.get(line_addr)
        if ms is None:
            ms = gen_markers(self.key, line_addr, mode=self.mode, bits=self.bits,
                             il_perline=self.il_perline, m_il=self._m_il)
            self._cache[line_addr] = ms
        return ms


# ---------------------------------------------------------------------------
# LIT


@dataclass
class Lit:
    """Line Inversion Table with a memory-mapped overflow bitmap.

    Once an insert overflows in MEMORY_MAPPED mode the table spills: every
    entry moves to the in-memory bitmap and each later lookup or update costs
    one memory access (``bitmap_accesses``) until the bitmap drains.
    """

    capacity: int = LIT_ENTRIES
    overflow_mode: OverflowMode = OverflowMode.MEMORY_MAPPED
    entries: set = field(default_factory=set)
    bitmap: set = field(default_factory=set)
    spilled: bool = False
    bitmap_accesses: int = 0
    overflows: int = 0

    def __len__(self) -> int:
        return len(self.entries) + len(self.bitmap)

    def __contains__(self, addr: int) -> bool:
        return addr in self.entries or addr in self.bitmap

    def contains(self, addr: int) -> bool:
        """Lookup on the read path; charged when the table lives in memory."""
        if self.spilled:
            self.bitmap_accesses += 1
            return addr in self.bitmap
        return addr in self.entries

    def insert(self, addr: int) -> None:
        if addr in self:
            return
        if self.spilled:
            self.bitmap.add(addr)
            self.bitmap_accesses += 1
            return
        if len(self.entries) >= self.capacity:
            self.overflows += 1
            handle_lit_overflow(self, self.overflow_mode)
            self.bitmap.add(addr)
            self.bitmap_accesses += 1
            return
        self.entries.add(addr)

    def remove(self, addr: int) -> None:
        if addr in self.entries:
            self.entries.discard(addr)
        elif addr in self.bitmap:
            self.bitmap.discard(addr)
            self.bitmap_accesses += 1
            if not self.bitmap:
                self.spilled = False

    def clear(self) -> None:
        self.entries.clear()
        self.bitmap.clear()
        self.spilled = False


def handle_lit_overflow(lit: Lit, mode: OverflowMode) -> None:
    """React to an insert on a full LIT.

    MEMORY_MAPPED moves the table into the in-memory bitmap. REKEY raises
    :class:`LitOverflow`; the memory owner must draw a new key, re-encode its
    contents and clear the table.
    """
    if OverflowMode(mode) == OverflowMode.MEMORY_MAPPED:
        lit.bitmap.update(lit.entries)
        lit.bitmap_accesses += len(lit.entries)
        lit.entries.clear()
        lit.spilled = True
        return
    raise LitOverflow(f"LIT full ({lit.capacity} entries)")


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    kind: Kind
    data: Optional[bytes] = None  # 60-byte payload or 64-byte line


def classify(addr: int, raw: bytes, markers: MarkerSet, lit: Lit) -> Classification:
    if raw == markers.m_il:
        return Classification(Kind.INVALID_SLOT)
    if raw == markers.m_il_inv:
        return Classification(Kind.UNCOMPRESSED, invert(raw) if lit.contains(addr) else raw)
    tail = raw[-markers.width:]
    if tail == markers.m4_bytes:
        return Classification(Kind.COMPRESSED_X4, raw[:PAYLOAD_BUDGET])
    if tail == markers.m2_bytes:
        return Classification(Kind.COMPRESSED_X2, raw[:PAYLOAD_BUDGET])
    if tail == markers.m2_inv or tail == markers.m4_inv:
        return Classification(Kind.UNCOMPRESSED, invert(raw) if lit.contains(addr) else raw)
    return Classification(Kind.UNCOMPRESSED, raw)


def needs_inversion(data: bytes, markers: MarkerSet) -> bool:
    tail = data[-markers.width:]
    return tail == markers.m2_bytes or tail == markers.m4_bytes or data == markers.m_il


def collision_mask(tails: np.ndarray, m2: np.ndarray, m4: np.ndarray) -> np.ndarray:
    """Vectorized marker-collision test on trailing marker-width words."""
    return (tails == m2) | (tails == m4)


class LitDelta(enum.Enum):
    NONE = "none"
    INSERT = "insert"
    REMOVE = "remove"


def prepare_uncompressed_write(addr: int, data: bytes, markers: MarkerSet,
                               lit: Lit) -> tuple[bytes, LitDelta]:
    """Raw image for an uncompressed write; applies the LIT update.

    Raises :class:`LitOverflow` when the table is full in REKEY mode; the LIT
    is left unchanged in that case.
    """
    if needs_inversion(data, markers):
        lit.insert(addr)
        return invert(data), LitDelta.INSERT
    if addr in lit:
        lit.remove(addr)
        return data, LitDelta.REMOVE
    return data, LitDelta.NONE


def compressed_image(payload: bytes, level_marker: bytes) -> bytes:
    """Slot image for a packed payload: payload, zero pad, trailing marker."""
    pad = LINE_SIZE - len(level_marker) - len(payload)
    if len(payload) > PAYLOAD_BUDGET or pad < 0:
        raise UsageError(f"payload of {len(payload)} bytes exceeds the budget")
    return payload + bytes(pad) + level_marker
