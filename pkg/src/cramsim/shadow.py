"""Ground-truth oracle that runs beside a controller.

The shadow knows the value every line would hold in a plain uncompressed
memory (the last value the program wrote, or its first-touch contents) and
the exact layout of every group. It never looks at markers, the LIT or the
predictor to decide what a line should contain.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .common import GROUP_SIZE, ZERO_LINE, IntegrityError, invert
from .layout import GroupState, SlotKind, residents, slot_kind


class Shadow:
    def __init__(self, initial: Optional[Mapping[int, bytes]] = None, strict: bool = True):
        self.values: dict[int, bytes] = dict(initial or {})
        self.layout: dict[int, GroupState] = {}
        self.strict = strict
        self.checked = 0
        self.mismatches: list[int] = []

    def expected(self, line: int) -> bytes:
        return self.values.get(line, ZERO_LINE)

    def write(self, line: int, data: bytes) -> None:
        self.values[line] = data

    def check(self, line: int, data: bytes) -> None:
        self.checked += 1
        if data != self.expected(line):
            self.mismatches.append(line)
            if self.strict:
                raise IntegrityError(f"line {line:#x} delivered a value the shadow never stored")

    def note_layout(self, group: int, state: GroupState) -> None:
        self.layout[group] = state

    def audit(self, ctl) -> int:
        """Decode every stored slot of every known group and compare with the truth.

        Checks vacated slots hold the invalid-line marker, packed slots
        decode to the current values of uncached residents, and the LIT holds
        exactly the uncompressed slots stored inverted. Returns the number of
        slots verified.
        """
        from . import codec
        from .common import Level

        seen = 0
        groups = {slot // GROUP_SIZE for slot in ctl.slots}
        for g in groups:
            state = self.layout.get(g, GroupState.U)
            if ctl.state.get(g, GroupState.U) != state:
                raise IntegrityError(f"group {g:#x}: controller layout disagrees with shadow")
            base = g * GROUP_SIZE
            for slot in range(GROUP_SIZE):
                addr = base + slot
                img = ctl.slots.get(addr)
                if img is None:
                    continue
                ms = ctl.markers(addr)
                kind = slot_kind(slot, state)
                res = residents(slot, state)
                cached = [base + i in ctl.llc for i in res]
                seen += 1
                if kind == SlotKind.INVALID:
                    if img != ms.m_il:
                        raise IntegrityError(f"slot {addr:#x} should hold the invalid-line marker")
                    continue
                if kind == SlotKind.UNCOMPRESSED:
                    if cached[0]:
                        continue
                    want = self.expected(addr)
                    if img == want and addr not in ctl.lit:
                        continue
                    if img == invert(want) and addr in ctl.lit:
                        continue
                    raise IntegrityError(f"slot {addr:#x}: image or LIT entry disagrees with the truth")
                level = Level.X4 if kind == SlotKind.PACKED_X4 else Level.X2
                marker = ms.m4_bytes if level == Level.X4 else ms.m2_bytes
                if img[-ms.width:] != marker:
                    raise IntegrityError(f"slot {addr:#x} lacks its {level.name} marker")
                lines = codec.unpack_group(codec.PackedPayload.from_bytes(level, img[:codec.PAYLOAD_BUDGET]))
                for i, d in zip(res, lines):
                    if base + i not in ctl.llc and d != self.expected(base + i):
                        raise IntegrityError(f"packed copy of line {base + i:#x} is stale")
        return seen
