"""LLC request traces: text format and synthetic workload generators.

One record per line::

    <core> <R|W> <hex byte address> [<128 hex digits of line data>]

``#`` starts a comment. Writes must carry data; reads may carry data to
define the line's contents on first touch.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, TextIO

from .common import CramError, LINE_SIZE, Level, ZERO_LINE

MAX_CORES = 8


class TraceError(CramError, ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    core: int
    op: str
    addr: int
    data: Optional[bytes] = None

    @property
    def line(self) -> int:
        return self.addr // LINE_SIZE

    @property
    def is_write(self) -> bool:
        return self.op == "W"


def parse_record(text: str, seq: int = 0, lineno: int = 0) -> Optional[TraceRecord]:
    body = text.split("#", 1)[0].strip()
    if not body:
        return None
    parts = body.split()
    where = f"line {lineno}"
    if len(parts) not in (3, 4):
        raise TraceError(f"{where}: expected '<core> <R|W> <addr> [data]', got {body!r}")
    core_s, op, addr_s = parts[:3]
    try:
        core = int(core_s, 10)
        addr = int(addr_s, 16)
    except ValueError:
        raise TraceError(f"{where}: bad core or address in {body!r}") from None
    if not 0 <= core < MAX_CORES:
        raise TraceError(f"{where}: core {core} outside 0-{MAX_CORES - 1}")
    op = op.upper()
    if op not in ("R", "W"):
        raise TraceError(f"{where}: op must be R or W, got {parts[1]!r}")
    if addr < 0 or addr >= 1 << 64:
        raise TraceError(f"{where}: address out of 64-bit range")
    if addr % LINE_SIZE:
        raise TraceError(f"{where}: address {addr:#x} is not {LINE_SIZE}-byte aligned")
    data = None
    if len(parts) == 4:
        if len(parts[3]) != 2 * LINE_SIZE:
            raise TraceError(f"{where}: data must be {2 * LINE_SIZE} hex digits")
        try:
            data = bytes.fromhex(parts[3])
        except ValueError:
            raise TraceError(f"{where}: data is not hexadecimal") from None
    elif op == "W":
        raise TraceError(f"{where}: write without data")
    return TraceRecord(seq, core, op, addr, data)


def parse_trace(stream: Iterable[str]) -> list[TraceRecord]:
    out = []
    for lineno, text in enumerate(stream, 1):
        rec = parse_record(text, len(out), lineno)
        if rec is not None:
            out.append(rec)
    return out


def format_record(rec: TraceRecord) -> str:
    s = f"{rec.core} {rec.op} {rec.addr:#x}"
    if rec.data is not None:
        s += " " + rec.data.hex()
    return s


def write_trace(records: Iterable[TraceRecord], fh: TextIO) -> None:
    for rec in records:
        fh.write(format_record(rec) + "\n")


def initial_contents(records: Iterable[TraceRecord]) -> dict[int, bytes]:
    """First-touch contents: data carried by a read that is a line's first access."""
    seen: set[int] = set()
    init = {}
    for rec in records:
        if rec.line in seen:
            continue
        seen.add(rec.line)
        if rec.op == "R" and rec.data is not None:
            init[rec.line] = rec.data
    return init


# ---------------------------------------------------------------------------
# line data


def line_for(rng: random.Random, level: Level) -> bytes:
    """Random line that packs 4:1 (X4), only 2:1 (X2) or not at all (UNCOMP)."""
    if level == Level.X4:
        words = [rng.randint(-8, 7) & 0xFFFFFFFF for _ in range(8)] + [0] * 8
        return struct.pack("<16I", *words)
    if level == Level.X2:
        words = [rng.randint(-128, 127) & 0xFFFFFFFF for _ in range(16)]
        return struct.pack("<16I", *words)
    return rng.randbytes(LINE_SIZE)


# ---------------------------------------------------------------------------
# generators


def _rec(core: int, op: str, line: int, data: Optional[bytes] = None) -> TraceRecord:
    return TraceRecord(0, core, op, line * LINE_SIZE, data)


def _renumber(records: Iterable[TraceRecord]) -> list[TraceRecord]:
    return [TraceRecord(i, r.core, r.op, r.addr, r.data) for i, r in enumerate(records)]


def gen_seq_compressible(rng: random.Random, lines: int = 4096, passes: int = 2, start: int = 0,
                         write_first: bool = True, core: int = 0) -> list[TraceRecord]:
    """Zero lines swept sequentially ``passes`` times.

    With ``write_first`` the first sweep writes the zeros (dirty data that
    compresses on eviction); later sweeps only read.
    """
    out = []
    for p in range(passes):
        for i in range(lines):
            if p == 0 and write_first:
                out.append(_rec(core, "W", start + i, ZERO_LINE))
            else:
                out.append(_rec(core, "R", start + i))
    return out


def gen_random_incompressible(rng: random.Random, ops: int = 20000, footprint: int = 16384,
                              start: int = 0, write_fraction: float = 0.3,
                              core: int = 0) -> list[TraceRecord]:
    out = []
    touched: set[int] = set()
    for _ in range(ops):
        line = start + rng.randrange(footprint)
        if rng.random() < write_fraction:
            out.append(_rec(core, "W", line, rng.randbytes(LINE_SIZE)))
        else:
            data = None if line in touched else rng.randbytes(LINE_SIZE)
            out.append(_rec(core, "R", line, data))
        touched.add(line)
    return out


def gen_page_homogeneous(rng: random.Random, pages: int = 128, ops: int = 20000, burst: int = 16,
                         page_size: int = 4096, start: int = 0, core: int = 0) -> list[TraceRecord]:
    """Pages of uniform compressibility: a writing warm-up sweep, then read bursts per page."""
    per_page = page_size // LINE_SIZE
    classes = [rng.choice((Level.UNCOMP, Level.X2, Level.X4)) for _ in range(pages)]
    out = []
    for p, level in enumerate(classes):
        for i in range(per_page):
            out.append(_rec(core, "W", start + p * per_page + i, line_for(rng, level)))
    while len(out) < pages * per_page + ops:
        p = rng.randrange(pages)
        for _ in range(burst):
            out.append(_rec(core, "R", start + p * per_page + rng.randrange(per_page)))
    return out[:pages * per_page + ops]


def gen_low_reuse_compressible(rng: random.Random, lines: int = 32768, start: int = 0,
                               write_fraction: float = 0.3, core: int = 0) -> list[TraceRecord]:
    """One sequential touch of compressible lines, never revisited."""
    out = []
    for i in range(lines):
        data = line_for(rng, Level.X4)
        op = "W" if rng.random() < write_fraction else "R"
        out.append(_rec(core, op, start + i, data))
    return out


def _gen_churn(rng: random.Random, ops: int, footprint: int, start: int,
               core: int) -> list[TraceRecord]:
    """Small region rewritten with data whose compressibility keeps changing."""
    out = []
    levels = (Level.UNCOMP, Level.X2, Level.X4, Level.X4)
    for _ in range(ops):
        line = start + rng.randrange(footprint)
        if rng.random() < 0.5:
            out.append(_rec(core, "W", line, line_for(rng, rng.choice(levels))))
        else:
            out.append(_rec(core, "R", line))
    return out


def gen_mixed(rng: random.Random, ops: int = 100000, region: int = 1 << 16,
              chunk: int = 64) -> list[TraceRecord]:
    """Interleaving of every generator on disjoint regions and cores."""
    share = max(1, ops // 5)
    parts = [
        gen_seq_compressible(rng, lines=max(4, share // 2), passes=2, start=0, core=0),
        gen_random_incompressible(rng, ops=share, footprint=region // 4, start=region, core=1),
        gen_page_homogeneous(rng, pages=max(1, region // 4 // 64), ops=share // 2,
                             start=2 * region, core=2),
        gen_low_reuse_compressible(rng, lines=share, start=3 * region, core=3),
        _gen_churn(rng, share, footprint=256, start=5 * region, core=4),
    ]
    cursors = [0] * len(parts)
    out: list[TraceRecord] = []
    live = [i for i, p in enumerate(parts) if p]
    while live and len(out) < ops:
        i = rng.choice(live)
        out.extend(parts[i][cursors[i]:cursors[i] + chunk])
        cursors[i] += chunk
        if cursors[i] >= len(parts[i]):
            live.remove(i)
    return out[:ops]


GENERATORS: dict[str, Callable[..., list[TraceRecord]]] = {
    "seq_compressible": gen_seq_compressible,
    "random_incompressible": gen_random_incompressible,
    "page_homogeneous": gen_page_homogeneous,
    "low_reuse_compressible": gen_low_reuse_compressible,
    "mixed": gen_mixed,
}


def generate(kind: str, params: Optional[dict] = None, seed: int = 0) -> list[TraceRecord]:
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise TraceError(f"unknown workload kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    return _renumber(gen(random.Random(seed), **(params or {})))


def iter_lines(records: Iterable[TraceRecord]) -> Iterator[str]:
    return (format_record(r) for r in records)
