"""Memory controller: read/write paths for every memory mode and the bandwidth ledger."""

from __future__ import annotations

import enum
import random
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Callable, Mapping, Optional, Union

from . import codec
from .common import GROUP_SIZE, ZERO_LINE, IntegrityError, Level, invert
from .layout import (GroupState, SlotKind, candidate_slots, level_of, make_state, plan_writes,
                     predicted_slot, slot_kind, slot_of)
from .llc import LLC, CacheLineMeta
from .marker import (Classification, Kind, Lit, LitOverflow, MarkerGen, MarkerMode, OverflowMode,
                     classify, compressed_image, prepare_uncompressed_write)
from .predictor import LineLocationPredictor


class Mode(str, enum.Enum):
    UNCOMPRESSED = "uncompressed"
    EXPLICIT = "explicit"
    CRAM_STATIC = "cram-static"
    CRAM_DYNAMIC = "cram-dynamic"
    IDEAL = "ideal"


@dataclass
class BandwidthLedger:
    demand_data: int = 0
    second_access: int = 0
    clean_writebacks: int = 0
    invalidates: int = 0
    dirty_writebacks: int = 0
    metadata_reads: int = 0
    metadata_writes: int = 0
    lit_bitmap_accesses: int = 0
    rekey_events: int = 0

    ACCESS_COUNTERS = (
        "demand_data", "second_access", "clean_writebacks", "invalidates", "dirty_writebacks",
        "metadata_reads", "metadata_writes", "lit_bitmap_accesses",
    )

    def total(self) -> int:
        """Memory transactions (rekey events are not transactions)."""
        return sum(getattr(self, name) for name in self.ACCESS_COUNTERS)

    def as_dict(self) -> dict[str, int]:
        return asdict(self)

    def copy(self) -> "BandwidthLedger":
        return BandwidthLedger(**asdict(self))

    def __sub__(self, other: "BandwidthLedger") -> "BandwidthLedger":
        return BandwidthLedger(**{f.name: getattr(self, f.name) - getattr(other, f.name)
                                  for f in fields(self)})


class Event(enum.Enum):
    COST = -1
    BENEFIT = 1


class DynamicPolicy:
    """Per-core saturating counters; the MSB enables compression for follower sets."""

    def __init__(self, cores: int = 8, bits: int = 12):
        self.bits = bits
        self.max = (1 << bits) - 1
        self.msb = 1 << (bits - 1)
        self.counters = [self.msb] * cores

    def update(self, event: Event, core_id: int, weight: int = 1) -> None:
        c = self.counters[core_id] + event.value * weight
        self.counters[core_id] = min(self.max, max(0, c))

    def enabled(self, core_id: int) -> bool:
        return bool(self.counters[core_id] & self.msb)

    @property
    def storage_bytes(self) -> int:
        return len(self.counters) * self.bits // 8


def dynamic_update(policy: DynamicPolicy, event: Event, core_id: int) -> None:
    policy.update(event, core_id)


def should_compress(llc: LLC, policy: DynamicPolicy, set_index: int, core_id: int) -> bool:
    return llc.is_sampled(set_index) or policy.enabled(core_id)


class MetadataCache:
    """On-chip cache of the 3-bit per-group CSI held in a reserved memory region."""

    CSI_BITS = 3

    def __init__(self, capacity: int = 32 << 10, block: int = 64):
        self.blocks_max = capacity // block
        self.groups_per_block = block * 8 // self.CSI_BITS
        self.blocks: OrderedDict[int, bool] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def reach_lines(self) -> int:
        return self.blocks_max * self.groups_per_block * GROUP_SIZE

    def access(self, group: int, write: bool = False) -> tuple[int, int]:
        """Returns (memory reads, memory writes) caused by this lookup."""
        blk = group // self.groups_per_block
        reads = writes = 0
        if blk in self.blocks:
            self.hits += 1
            self.blocks.move_to_end(blk)
        else:
            self.misses += 1
            reads = 1
            if len(self.blocks) >= self.blocks_max:
                _, dirty = self.blocks.popitem(last=False)
                writes += dirty
            self.blocks[blk] = False
        if write:
            self.blocks[blk] = True
        return reads, writes


@dataclass
class ControllerConfig:
    memory_lines: int = 1 << 20
    marker_mode: str = "perline"
    marker_bits: int = 32
    marker_il: str = "global"
    lit_entries: int = 16
    lit_overflow: str = "mmap"
    lct_entries: int = 512
    page_size: int = 4096
    llp_update: str = "every"
    metadata_cache: int = 32 << 10
    cores: int = 8
    counter_bits: int = 12
    cost_weight: int = 1
    mispredict_weight: int = 1
    benefit_weight: int = 1
    seed: int = 0


Initial = Union[Mapping[int, bytes], Callable[[int], bytes], None]


class Controller:
    """One memory system instance driving an LLC for a single mode.

    ``state`` is the ground-truth layout of every group. Only the explicit and
    ideal modes read it; the CRAM modes locate lines through the predictor and
    markers and use it solely for integrity checks.
    """

    def __init__(self, mode: Union[Mode, str], llc: LLC, config: Optional[ControllerConfig] = None,
                 initial: Initial = None, shadow=None):
        self.mode = Mode(mode)
        self.cfg = config or ControllerConfig()
        self.llc = llc
        self.shadow = shadow
        if initial is None:
            self._initial = lambda line: ZERO_LINE
        elif callable(initial):
            self._initial = initial
        else:
            self._initial = lambda line, m=initial: m.get(line, ZERO_LINE)
        self.rng = random.Random(self.cfg.seed)
        self.markers = self._new_markers()
        self.lit = Lit(self.cfg.lit_entries, OverflowMode(self.cfg.lit_overflow))
        self.llp = LineLocationPredictor(self.cfg.lct_entries, self.cfg.page_size, self.cfg.seed,
                                         self.cfg.llp_update)
        self.policy = DynamicPolicy(self.cfg.cores, self.cfg.counter_bits)
        self.metadata = MetadataCache(self.cfg.metadata_cache)
        self.ledger = BandwidthLedger()
        self.slots: dict[int, bytes] = {}
        self.state: dict[int, GroupState] = {}
        self.reads = 0

    # -- memory array -------------------------------------------------------

    def _new_markers(self) -> MarkerGen:
        return MarkerGen(self.rng.getrandbits(128), MarkerMode(self.cfg.marker_mode),
                         self.cfg.marker_bits, self.cfg.marker_il == "perline")

    def _check_addr(self, slot: int) -> None:
        if not 0 <= slot < self.cfg.memory_lines:
            raise IndexError(f"line {slot:#x} outside a {self.cfg.memory_lines}-line memory")

    def raw(self, slot: int) -> bytes:
        """Stored image of ``slot``; untouched slots are installed uncompressed."""
        img = self.slots.get(slot)
        if img is None:
            self._check_addr(slot)
            self._store_line(slot, self._initial(slot))
            img = self.slots[slot]
        return img

    def _sync_lit(self, before: int) -> None:
        self.ledger.lit_bitmap_accesses += self.lit.bitmap_accesses - before

    def _read_slot(self, slot: int) -> Classification:
        img = self.raw(slot)
        before = self.lit.bitmap_accesses
        cls = classify(slot, img, self.markers(slot), self.lit)
        self._sync_lit(before)
        return cls

    def _store_line(self, slot: int, data: bytes) -> None:
        while True:
            before = self.lit.bitmap_accesses
            try:
                img, _ = prepare_uncompressed_write(slot, data, self.markers(slot), self.lit)
            except LitOverflow:
                self._rekey()
                continue
            self._sync_lit(before)
            self.slots[slot] = img
            return

    def _store_marked(self, slot: int, img: bytes) -> None:
        if slot in self.lit:
            before = self.lit.bitmap_accesses
            self.lit.remove(slot)
            self._sync_lit(before)
        self.slots[slot] = img

    def _store_payload(self, slot: int, payload: codec.PackedPayload) -> None:
        ms = self.markers(slot)
        marker = ms.m4_bytes if payload.level == Level.X4 else ms.m2_bytes
        self._store_marked(slot, compressed_image(payload.to_bytes(), marker))

    def _store_invalid(self, slot: int) -> None:
        self._store_marked(slot, self.markers(slot).m_il)

    def _rekey(self) -> None:
        """Draw a new key and re-encode every stored slot under it."""
        self.ledger.rekey_events += 1
        decoded = {}
        for slot, img in self.slots.items():
            ms = self.markers(slot)
            if img == ms.m_il:
                decoded[slot] = None
            elif img[-ms.width:] in (ms.m2_bytes, ms.m4_bytes):
                decoded[slot] = (img[-ms.width:] == ms.m4_bytes, img[:codec.PAYLOAD_BUDGET])
            else:
                decoded[slot] = invert(img) if slot in self.lit else img
        while True:
            self.markers = self._new_markers()
            self.lit.clear()
            try:
                for slot, item in decoded.items():
                    ms = self.markers(slot)
                    if item is None:
                        self.slots[slot] = ms.m_il
                    elif isinstance(item, tuple):
                        quad, payload = item
                        self.slots[slot] = compressed_image(
                            payload, ms.m4_bytes if quad else ms.m2_bytes)
                    else:
                        self.slots[slot], _ = prepare_uncompressed_write(slot, item, ms, self.lit)
                return
            except LitOverflow:
                self.ledger.rekey_events += 1

    # -- policy -------------------------------------------------------------

    @property
    def dynamic(self) -> bool:
        return self.mode == Mode.CRAM_DYNAMIC

    def compress_enabled(self, base: int, core_id: int) -> bool:
        if self.mode == Mode.UNCOMPRESSED:
            return False
        if self.dynamic:
            return should_compress(self.llc, self.policy, self.llc.set_index(base), core_id)
        return True

    def _cost(self, base: int, core_id: int, weight: int) -> None:
        if self.dynamic and weight > 0 and self.llc.sampled(base):
            self.policy.update(Event.COST, core_id, weight)

    # -- read path ----------------------------------------------------------

    @staticmethod
    def _interpret(cls: Classification, slot: int, idx: int) -> Optional[tuple[Level, dict[int, bytes]]]:
        if cls.kind == Kind.INVALID_SLOT:
            return None
        if cls.kind == Kind.UNCOMPRESSED:
            return (Level.UNCOMP, {slot: cls.data}) if slot == idx else None
        level = Level.X4 if cls.kind == Kind.COMPRESSED_X4 else Level.X2
        lines = codec.unpack_group(codec.PackedPayload.from_bytes(level, cls.data))
        if level == Level.X4:
            if slot != 0:
                raise IntegrityError(f"4:1 payload found in slot {slot}")
            return level, dict(enumerate(lines))
        if slot % 2:
            raise IntegrityError(f"2:1 payload found in odd slot {slot}")
        if idx not in (slot, slot + 1):
            return None
        return level, {slot: lines[0], slot + 1: lines[1]}

    def fetch(self, line: int, core_id: int = 0) -> tuple[Level, dict[int, bytes]]:
        """Read ``line`` from memory; returns its level and all lines delivered."""
        self.reads += 1
        base, idx = line - line % GROUP_SIZE, line % GROUP_SIZE
        state = self.state.get(base // GROUP_SIZE, GroupState.U)
        if self.mode in (Mode.UNCOMPRESSED, Mode.IDEAL):
            order: tuple[int, ...] = (idx if self.mode == Mode.UNCOMPRESSED else slot_of(idx, state),)
            predicted = None
        elif self.mode == Mode.EXPLICIT:
            r, w = self.metadata.access(base // GROUP_SIZE)
            self.ledger.metadata_reads += r
            self.ledger.metadata_writes += w
            order = (slot_of(idx, state),)
            predicted = None
        else:
            cands = candidate_slots(idx)
            if len(cands) == 1:
                order, predicted = cands, None
            else:
                predicted = self.llp.predict(line)
                first = predicted_slot(idx, predicted)
                order = (first,) + tuple(c for c in cands if c != first)
        for n, slot in enumerate(order):
            if n == 0:
                self.ledger.demand_data += 1
            else:
                self.ledger.second_access += 1
                self._cost(base, core_id, self.cfg.mispredict_weight)
            found = self._interpret(self._read_slot(base + slot), slot, idx)
            if found is not None:
                break
        else:
            raise IntegrityError(f"line {line:#x} not found in any candidate slot")
        level, lines = found
        if level != level_of(idx, state):
            raise IntegrityError(f"line {line:#x} read at {level.name}, layout is {state.name}")
        if predicted is not None:
            self.llp.record(n == 0)
            self.llp.update(line, level, predicted)
        return level, {base + i: d for i, d in lines.items()}

    # -- fill / evict -------------------------------------------------------

    def access(self, line: int, write: bool = False, core_id: int = 0,
               data: Optional[bytes] = None) -> bytes:
        """Demand access to the LLC; returns the line value seen after the access."""
        r = self.llc.access(line, write, core_id, data)
        if r.hit:
            if r.benefit and self.dynamic:
                self.policy.update(Event.BENEFIT, r.core_id, self.cfg.benefit_weight)
            return self.llc.get(line).data
        level, lines = self.fetch(line, core_id)
        if self.shadow is not None:
            for l, d in lines.items():
                if l not in self.llc:
                    self.shadow.check(l, d)
        self._fill(line, level, lines, core_id)
        meta = self.llc.get(line)
        if write:
            meta.dirty = True
            if data is not None:
                meta.data = data
        return meta.data

    def _fill(self, demanded: int, level: Level, lines: dict[int, bytes], core_id: int) -> None:
        batch = set(lines)
        for l in sorted(lines, key=lambda x: x != demanded):
            if l in self.llc:
                if l == demanded:
                    raise IntegrityError(f"demand miss on cached line {l:#x}")
                continue
            while not self.llc.has_room(l):
                victim = self.llc.victim(l, exclude=batch)
                self.writeback(self.llc.ganged_evict(victim), exclude=batch)
            self.llc.insert(CacheLineMeta(l, lines[l], prior_csi=level,
                                          prefetched=l != demanded, core_id=core_id))

    def flush(self) -> None:
        """Evict every cached line (ganged), writing back as on a normal eviction."""
        for meta in list(self.llc):
            if meta.line in self.llc:
                self.writeback(self.llc.ganged_evict(meta.line))

    def writeback(self, evicted: list[CacheLineMeta], exclude=()) -> None:
        """Write an eviction set back, compressing with co-resident neighbors when allowed."""
        first = evicted[0]
        base = first.line - first.line % GROUP_SIZE
        group = base // GROUP_SIZE
        core_id = first.core_id
        members: dict[int, CacheLineMeta] = {m.line - base: m for m in evicted}
        old = self.state.get(group, GroupState.U)
        compress = self.compress_enabled(base, core_id)
        excluded = set(exclude)

        def available(idx: int) -> bool:
            return idx in members or (base + idx not in excluded and base + idx in self.llc)

        def pull(idx: int) -> None:
            if idx not in members:
                for m in self.llc.ganged_evict(base + idx):
                    members[m.line - base] = m

        quad = False
        pairs = {0: old.pair01, 2: old.pair23}
        if compress:
            if all(available(i) for i in range(GROUP_SIZE)):
                lines = [members[i].data if i in members else self.llc.get(base + i).data
                         for i in range(GROUP_SIZE)]
                payload = codec.pack_group(lines, Level.X4)
                if payload is not None:
                    quad = True
                    for i in range(GROUP_SIZE):
                        pull(i)
            if not quad:
                for lead in (0, 2):
                    if lead not in members and lead + 1 not in members:
                        continue
                    pairs[lead] = False
                    if available(lead) and available(lead + 1):
                        pair = [members[i].data if i in members else self.llc.get(base + i).data
                                for i in (lead, lead + 1)]
                        if codec.pack_group(pair, Level.X2) is not None:
                            pairs[lead] = True
                            pull(lead)
                            pull(lead + 1)
        elif old == GroupState.Q:
            quad = not any(m.dirty for m in members.values())
        else:
            for lead in (0, 2):
                unit = [members[i] for i in (lead, lead + 1) if i in members]
                if unit and any(m.dirty for m in unit):
                    pairs[lead] = False

        for idx, m in members.items():
            if m.prior_csi != level_of(idx, old):
                raise IntegrityError(
                    f"prior_csi {m.prior_csi.name} of {m.line:#x} disagrees with layout {old.name}")
        new = make_state(pairs[0], pairs[2], quad)
        data = {i: m.data for i, m in members.items()}
        contents: dict[int, object] = {}
        for slot in members:
            kind = slot_kind(slot, new)
            if kind == SlotKind.UNCOMPRESSED:
                contents[slot] = data[slot]
            elif kind == SlotKind.PACKED_X4:
                contents[slot] = codec.pack_group([data[i] for i in range(GROUP_SIZE)], Level.X4)
            elif kind == SlotKind.PACKED_X2:
                contents[slot] = codec.pack_group([data[slot], data[slot + 1]], Level.X2)
        plan = plan_writes(new, contents, sorted(members))

        issued = 0
        for w in plan.writes:
            residents = [i for i in range(GROUP_SIZE) if slot_of(i, new) == w.slot]
            dirty = any(members[i].dirty for i in residents)
            if slot_kind(w.slot, old) == w.kind and (w.kind == SlotKind.INVALID or not dirty):
                continue
            issued += 1
            slot = base + w.slot
            if w.kind == SlotKind.INVALID:
                self._store_invalid(slot)
                if self.mode != Mode.IDEAL:
                    self.ledger.invalidates += 1
                continue
            if w.kind == SlotKind.UNCOMPRESSED:
                self._store_line(slot, w.content)
            else:
                self._store_payload(slot, w.content)
            if dirty:
                self.ledger.dirty_writebacks += 1
            elif self.mode != Mode.IDEAL:
                self.ledger.clean_writebacks += 1

        ndirty = sum(m.dirty for m in members.values())
        self._cost(base, core_id, self.cfg.cost_weight * max(0, issued - ndirty))
        if new != old:
            self.state[group] = new
            if self.mode == Mode.EXPLICIT:
                r, w = self.metadata.access(group, write=True)
                self.ledger.metadata_reads += r
                self.ledger.metadata_writes += w
        if self.shadow is not None:
            self.shadow.note_layout(group, new)


def storage_budget(cfg: Optional[ControllerConfig] = None) -> dict[str, int]:
    """On-chip storage of the added controller structures, in bytes."""
    cfg = cfg or ControllerConfig()
    lit_entry_bits = 32  # valid bit + 30-bit line address, word aligned
    rows = {
        "marker_2to1": cfg.marker_bits // 8,
        "marker_4to1": cfg.marker_bits // 8,
        "marker_invalid_line": 64,
        "lit": cfg.lit_entries * lit_entry_bits // 8,
        "llp": cfg.lct_entries * 2 // 8,
        "dynamic_counters": cfg.cores * cfg.counter_bits // 8,
    }
    rows["total"] = sum(rows.values())
    return rows
