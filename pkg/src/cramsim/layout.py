"""Restricted placement of a 4-line group.

Line 0 never moves. Lines 1 and 3 can join their pair leader (slot 0 or 2),
and every line can join slot 0 under 4:1 packing, which leaves five legal
layouts per group.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .codec import PackedPayload
from .common import GROUP_SIZE, Level, UsageError


class GroupState(enum.IntEnum):
    """Group layout; the value is the 3-bit CSI code."""

    U = 0
    P01 = 1
    P23 = 2
    P01P23 = 3
    Q = 4

    @property
    def pair01(self) -> bool:
        return self in (GroupState.P01, GroupState.P01P23)

    @property
    def pair23(self) -> bool:
        return self in (GroupState.P23, GroupState.P01P23)


_SLOT_OF = {
    GroupState.U: (0, 1, 2, 3),
    GroupState.P01: (0, 0, 2, 3),
    GroupState.P23: (0, 1, 2, 2),
    GroupState.P01P23: (0, 0, 2, 2),
    GroupState.Q: (0, 0, 0, 0),
}

_CANDIDATES = ((0,), (1, 0), (2, 0), (3, 2, 0))


def slot_of(line_idx: int, state: GroupState) -> int:
    return _SLOT_OF[state][line_idx]


def candidate_slots(line_idx: int) -> tuple[int, ...]:
    return _CANDIDATES[line_idx]


def level_of(line_idx: int, state: GroupState) -> Level:
    if state == GroupState.Q:
        return Level.X4
    if (line_idx < 2 and state.pair01) or (line_idx >= 2 and state.pair23):
        return Level.X2
    return Level.UNCOMP


def predicted_slot(line_idx: int, level: Level) -> int:
    """Slot holding ``line_idx`` if its group is packed at ``level``."""
    if level == Level.X4:
        return 0
    if level == Level.X2:
        return line_idx & ~1
    return line_idx


def residents(slot: int, state: GroupState) -> tuple[int, ...]:
    """Lines whose data lives in ``slot`` (empty for a vacated slot)."""
    return tuple(i for i, s in enumerate(_SLOT_OF[state]) if s == slot)


def co_members(line_idx: int, level: Level) -> tuple[int, ...]:
    """Lines packed together with ``line_idx`` at ``level``, itself included."""
    if level == Level.X4:
        return (0, 1, 2, 3)
    if level == Level.X2:
        lead = line_idx & ~1
        return (lead, lead + 1)
    return (line_idx,)


def make_state(pair01: bool, pair23: bool, quad: bool = False) -> GroupState:
    if quad:
        return GroupState.Q
    if pair01 and pair23:
        return GroupState.P01P23
    if pair01:
        return GroupState.P01
    if pair23:
        return GroupState.P23
    return GroupState.U


class SlotKind(enum.Enum):
    PACKED_X2 = "x2"
    PACKED_X4 = "x4"
    UNCOMPRESSED = "uncompressed"
    INVALID = "invalid"


@dataclass(frozen=True)
class SlotWrite:
    slot: int
    kind: SlotKind
    content: Union[bytes, PackedPayload, None] = None


@dataclass(frozen=True)
class SlotPlan:
    state: GroupState
    writes: tuple[SlotWrite, ...]


def slot_kind(slot: int, state: GroupState) -> SlotKind:
    res = residents(slot, state)
    if not res:
        return SlotKind.INVALID
    if len(res) == 4:
        return SlotKind.PACKED_X4
    if len(res) == 2:
        return SlotKind.PACKED_X2
    return SlotKind.UNCOMPRESSED


def plan_writes(state: GroupState,
                contents: Mapping[int, Union[bytes, PackedPayload]],
                slots: Optional[Sequence[int]] = None) -> SlotPlan:
    """Slot images for ``state``; vacated slots get the invalid-line marker.

    ``contents`` maps slot -> line (uncompressed slots) or payload (packed
    slots). ``slots`` restricts the plan to a subset of the group's slots.
    """
    writes = []
    for slot in range(GROUP_SIZE) if slots is None else slots:
        kind = slot_kind(slot, state)
        if kind == SlotKind.INVALID:
            writes.append(SlotWrite(slot, kind))
            continue
        item = contents.get(slot)
        if kind == SlotKind.UNCOMPRESSED:
            if not isinstance(item, (bytes, bytearray)):
                raise UsageError(f"slot {slot} of {state.name} needs an uncompressed line")
            writes.append(SlotWrite(slot, kind, bytes(item)))
        else:
            want = Level.X4 if kind == SlotKind.PACKED_X4 else Level.X2
            if not isinstance(item, PackedPayload) or item.level != want:
                raise UsageError(f"slot {slot} of {state.name} needs a {want.name} payload")
            writes.append(SlotWrite(slot, kind, item))
    return SlotPlan(state, tuple(writes))
