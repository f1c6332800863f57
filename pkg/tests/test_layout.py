import itertools

import pytest

from cramsim.codec import pack_group
from cramsim.common import Level, UsageError
from cramsim.layout import (GroupState, SlotKind, candidate_slots, co_members, level_of, make_state,
                            plan_writes, predicted_slot, residents, slot_kind, slot_of)

ZERO = bytes(64)
LINE = bytes(range(64))


def test_five_states_three_bit_codes():
    assert len(GroupState) == 5
    assert [s.value for s in GroupState] == [0, 1, 2, 3, 4]
    assert all(s.value < 8 for s in GroupState)


@pytest.mark.parametrize("state", list(GroupState))
def test_line0_never_moves(state):
    assert slot_of(0, state) == 0


def test_identity_when_uncompressed():
    assert [slot_of(i, GroupState.U) for i in range(4)] == [0, 1, 2, 3]


def test_slot_maps():
    assert [slot_of(i, GroupState.P01) for i in range(4)] == [0, 0, 2, 3]
    assert [slot_of(i, GroupState.P23) for i in range(4)] == [0, 1, 2, 2]
    assert [slot_of(i, GroupState.P01P23) for i in range(4)] == [0, 0, 2, 2]
    assert [slot_of(i, GroupState.Q) for i in range(4)] == [0, 0, 0, 0]


def test_candidates_average_two():
    assert candidate_slots(0) == (0,)
    assert candidate_slots(3) == (3, 2, 0)
    assert sum(len(candidate_slots(i)) for i in range(4)) / 4 == 2


def test_candidates_are_exactly_reachable_slots():
    for i in range(4):
        reachable = {slot_of(i, s) for s in GroupState}
        assert set(candidate_slots(i)) == reachable
        for s in GroupState:
            assert slot_of(i, s) in candidate_slots(i)


@pytest.mark.parametrize("state", list(GroupState))
def test_resident_exactness(state):
    lines = list(itertools.chain.from_iterable(residents(s, state) for s in range(4)))
    assert sorted(lines) == [0, 1, 2, 3]


@pytest.mark.parametrize("state", list(GroupState))
def test_predicted_slot_matches_layout(state):
    for i in range(4):
        assert predicted_slot(i, level_of(i, state)) == slot_of(i, state)
        assert i in co_members(i, level_of(i, state))


def test_make_state_round_trip():
    for s in GroupState:
        assert make_state(s.pair01, s.pair23, s == GroupState.Q) == s


def _contents(state):
    out = {}
    for slot in range(4):
        kind = slot_kind(slot, state)
        if kind == SlotKind.UNCOMPRESSED:
            out[slot] = LINE
        elif kind == SlotKind.PACKED_X2:
            out[slot] = pack_group([ZERO, ZERO], Level.X2)
        elif kind == SlotKind.PACKED_X4:
            out[slot] = pack_group([ZERO] * 4, Level.X4)
    return out


def test_plan_q():
    plan = plan_writes(GroupState.Q, _contents(GroupState.Q))
    assert [w.kind for w in plan.writes] == [SlotKind.PACKED_X4] + [SlotKind.INVALID] * 3


def test_plan_u():
    plan = plan_writes(GroupState.U, _contents(GroupState.U))
    assert [w.kind for w in plan.writes] == [SlotKind.UNCOMPRESSED] * 4


def test_plan_p01():
    plan = plan_writes(GroupState.P01, _contents(GroupState.P01))
    assert [w.kind for w in plan.writes] == [SlotKind.PACKED_X2, SlotKind.INVALID,
                                             SlotKind.UNCOMPRESSED, SlotKind.UNCOMPRESSED]


@pytest.mark.parametrize("state,invalid", [
    (GroupState.U, []), (GroupState.P01, [1]), (GroupState.P23, [3]),
    (GroupState.P01P23, [1, 3]), (GroupState.Q, [1, 2, 3]),
])
def test_invalidation_completeness(state, invalid):
    plan = plan_writes(state, _contents(state))
    assert [w.slot for w in plan.writes if w.kind == SlotKind.INVALID] == invalid
    assert sorted(w.slot for w in plan.writes) == [0, 1, 2, 3]


def test_plan_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        plan_writes(GroupState.Q, {0: LINE})
    with pytest.raises(UsageError):
        plan_writes(GroupState.U, {0: LINE, 1: LINE, 2: LINE})
    with pytest.raises(UsageError):
        plan_writes(GroupState.P01, {0: pack_group([ZERO] * 4, Level.X4), 2: LINE, 3: LINE})


def test_plan_subset_of_slots():
    plan = plan_writes(GroupState.P23, {2: pack_group([ZERO, ZERO], Level.X2)}, slots=[2, 3])
    assert [(w.slot, w.kind) for w in plan.writes] == [(2, SlotKind.PACKED_X2), (3, SlotKind.INVALID)]
