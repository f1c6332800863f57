"""Set-associative LRU last-level cache with compression-aware tags."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

from .common import GROUP_SIZE, LINE_SIZE, Level
from .layout import co_members


@dataclass
class CacheLineMeta:
    line: int
    data: bytes
    dirty: bool = False
    prior_csi: Level = Level.UNCOMP
    prefetched: bool = False
    reuse: bool = False
    core_id: int = 0


class AccessResult(NamedTuple):
    hit: bool
    benefit: bool = False  # first demand hit on a prefetched line of a sampled set
    core_id: int = 0


class LLC:
    """LRU cache indexed by group, so all four lines of a group share a set.

    Filling is driven by the controller: it asks for a victim with
    :meth:`victim`, evicts it with :meth:`ganged_evict` and then
    :meth:`insert`\\ s the new line.
    """

    def __init__(self, capacity: int = 8 << 20, assoc: int = 16, sampled_fraction: float = 0.01):
        if capacity % (assoc * LINE_SIZE):
            raise ValueError("capacity must be a multiple of assoc * line size")
        nsets = capacity // (assoc * LINE_SIZE)
        if nsets & (nsets - 1):
            raise ValueError(f"set count {nsets} is not a power of two")
        if assoc < GROUP_SIZE:
            raise ValueError(f"associativity must hold a whole group ({GROUP_SIZE} ways)")
        if not 0.0 <= sampled_fraction <= 1.0:
            raise ValueError("sampled_fraction must lie in [0, 1]")
        self.capacity = capacity
        self.assoc = assoc
        self.nsets = nsets
        self.sampled_fraction = sampled_fraction
        self._stride = round(1 / sampled_fraction) if sampled_fraction > 0 else 0
        self.sets: list[OrderedDict[int, CacheLineMeta]] = [OrderedDict() for _ in range(nsets)]
        self.hits = 0
        self.misses = 0

    def set_index(self, line: int) -> int:
        return (line // GROUP_SIZE) % self.nsets

    def is_sampled(self, set_index: int) -> bool:
        return self._stride > 0 and set_index % self._stride == 0

    def sampled(self, line: int) -> bool:
        return self.is_sampled(self.set_index(line))

    @property
    def sampled_sets(self) -> int:
        return sum(self.is_sampled(s) for s in range(self.nsets))

    def __contains__(self, line: int) -> bool:
        return line in self.sets[self.set_index(line)]

    def get(self, line: int) -> Optional[CacheLineMeta]:
        return self.sets[self.set_index(line)].get(line)

    def __iter__(self) -> Iterator[CacheLineMeta]:
        for s in self.sets:
            yield from list(s.values())

    def __len__(self) -> int:
        return sum(len(s) for s in self.sets)

    def access(self, line: int, write: bool = False, core_id: int = 0,
               data: Optional[bytes] = None) -> AccessResult:
        """Demand access; on a hit updates recency (and data/dirty for writes)."""
        ways = self.sets[self.set_index(line)]
        meta = ways.get(line)
        if meta is None:
            self.misses += 1
            return AccessResult(False)
        self.hits += 1
        ways.move_to_end(line)
        benefit = False
        if meta.prefetched and not meta.reuse and self.sampled(line):
            meta.reuse = True
            benefit = True
        if write:
            meta.dirty = True
            if data is not None:
                meta.data = data
        return AccessResult(True, benefit, meta.core_id)

    def has_room(self, line: int) -> bool:
        return len(self.sets[self.set_index(line)]) < self.assoc

    def victim(self, line: int, exclude: Iterable[int] = ()) -> int:
        """LRU line of ``line``'s set, skipping ``exclude``."""
        skip = set(exclude)
        for cand in self.sets[self.set_index(line)]:
            if cand not in skip:
                return cand
        raise ValueError("no evictable line in set")

    def insert(self, meta: CacheLineMeta) -> None:
        ways = self.sets[self.set_index(meta.line)]
        if meta.line in ways:
            raise ValueError(f"line {meta.line:#x} already cached")
        if len(ways) >= self.assoc:
            raise ValueError("set is full")
        if not self.sampled(meta.line):
            meta.reuse = False
        ways[meta.line] = meta

    def remove(self, line: int) -> CacheLineMeta:
        return self.sets[self.set_index(line)].pop(line)

    def ganged_evict(self, victim: int) -> list[CacheLineMeta]:
        """Remove ``victim`` and every cached member of its compressed group."""
        meta = self.get(victim)
        if meta is None:
            raise KeyError(victim)
        base = victim - victim % GROUP_SIZE
        out = [self.remove(victim)]
        if meta.prior_csi == Level.UNCOMP:
            return out
        for idx in co_members(victim % GROUP_SIZE, meta.prior_csi):
            other = self.get(base + idx)
            if other is not None and other.line != victim and other.prior_csi != Level.UNCOMP:
                out.append(self.remove(other.line))
        return out

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0
