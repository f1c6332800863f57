"""Drive traces through one controller per mode and collect statistics."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, TextIO

from . import codec
from .common import GROUP_SIZE, ZERO_LINE, IntegrityError
from .config import SimConfig
from .controller import BandwidthLedger, Controller, Mode
from .llc import LLC
from .shadow import Shadow
from .trace import TraceRecord, initial_contents

ALL_MODES = tuple(m.value for m in Mode)


@dataclass
class ModeResult:
    mode: str
    ledger: BandwidthLedger
    requests: int = 0
    reads: int = 0
    writes: int = 0
    llc_hits: int = 0
    llc_misses: int = 0
    llp_predictions: int = 0
    llp_correct: int = 0
    lit_overflows: int = 0
    shadow_checked: int = 0
    latency_proxy: float = 0.0

    @property
    def total(self) -> int:
        return self.ledger.total()

    @property
    def llc_hit_rate(self) -> float:
        return self.llc_hits / self.requests if self.requests else 0.0

    @property
    def llp_accuracy(self) -> float:
        return self.llp_correct / self.llp_predictions if self.llp_predictions else 1.0

    def counters(self) -> dict[str, float]:
        out: dict[str, float] = dict(self.ledger.as_dict())
        out.update(
            total_accesses=self.total,
            requests=self.requests,
            reads=self.reads,
            writes=self.writes,
            llc_hits=self.llc_hits,
            llc_misses=self.llc_misses,
            llc_hit_rate=round(self.llc_hit_rate, 6),
            llp_predictions=self.llp_predictions,
            llp_accuracy=round(self.llp_accuracy, 6),
            lit_overflows=self.lit_overflows,
            shadow_checked=self.shadow_checked,
            latency_proxy=self.latency_proxy,
        )
        return out


@dataclass
class StatsReport:
    results: dict[str, ModeResult] = field(default_factory=dict)
    histogram: dict[str, float] = field(default_factory=dict)

    def normalized(self, mode: str) -> Optional[float]:
        base = self.results.get(Mode.UNCOMPRESSED.value)
        if base is None or base.total == 0:
            return None
        return self.results[mode].total / base.total

    def rows(self) -> list[tuple[str, str, float]]:
        out = []
        for mode, res in self.results.items():
            for name, value in res.counters().items():
                out.append((mode, name, value))
            norm = self.normalized(mode)
            if norm is not None:
                out.append((mode, "normalized_accesses", round(norm, 6)))
        for name, value in self.histogram.items():
            out.append(("summary", name, value))
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mode", "counter", "value"))
        w.writerows(self.rows())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def build(mode: str, cfg: SimConfig, initial: Optional[Mapping[int, bytes]] = None,
          check: bool = True) -> Controller:
    llc = LLC(cfg.llc_capacity, cfg.llc_assoc, cfg.sampled_fraction)
    shadow = Shadow(initial) if check else None
    return Controller(mode, llc, cfg.controller, initial, shadow)


def drive(ctl: Controller, trace: Iterable[TraceRecord]) -> ModeResult:
    """Run ``trace`` on ``ctl``; with a shadow attached every value is checked."""
    res = ModeResult(ctl.mode.value, ctl.ledger)
    shadow = ctl.shadow
    for rec in trace:
        line = rec.line
        res.requests += 1
        if rec.op == "W":
            res.writes += 1
            ctl.access(line, True, rec.core, rec.data)
            if shadow is not None:
                shadow.write(line, rec.data)
        else:
            res.reads += 1
            value = ctl.access(line, False, rec.core)
            if shadow is not None and value != shadow.expected(line):
                raise IntegrityError(f"read of line {line:#x} returned a wrong value")
    return finish(ctl, res)


def finish(ctl: Controller, res: ModeResult) -> ModeResult:
    res.llc_hits = ctl.llc.hits
    res.llc_misses = ctl.llc.misses
    res.llp_predictions = ctl.llp.predictions
    res.llp_correct = ctl.llp.correct
    res.lit_overflows = ctl.lit.overflows
    res.shadow_checked = ctl.shadow.checked if ctl.shadow is not None else 0
    return res


def simulate(mode: str, cfg: SimConfig, trace: Sequence[TraceRecord], check: bool = True,
             initial: Optional[Mapping[int, bytes]] = None) -> ModeResult:
    if initial is None:
        initial = initial_contents(trace)
    ctl = build(mode, cfg, initial, check)
    res = drive(ctl, trace)
    res.latency_proxy = res.total * cfg.per_access_cost
    return res


def _simulate_args(args):
    return simulate(*args)


def compressibility_histogram(values: Mapping[int, bytes]) -> dict[str, float]:
    """Fraction of touched aligned pairs / quads whose packed size fits 64B and 60B."""
    groups: dict[int, None] = {}
    pairs: dict[int, None] = {}
    for line in values:
        groups[line // GROUP_SIZE] = None
        pairs[line // 2] = None

    def get(l: int) -> bytes:
        return values.get(l, ZERO_LINE)

    def frac(keys, n):
        fit64 = fit60 = 0
        for k in keys:
            size = codec.packed_size([get(k * n + i) for i in range(n)])
            fit64 += size <= 64
            fit60 += size <= codec.PAYLOAD_BUDGET
        total = len(keys) or 1
        return fit64 / total, fit60 / total

    p64, p60 = frac(list(pairs), 2)
    q64, q60 = frac(list(groups), 4)
    return {
        "touched_pairs": len(pairs),
        "pair_fit_64": round(p64, 6),
        "pair_fit_60": round(p60, 6),
        "touched_quads": len(groups),
        "quad_fit_64": round(q64, 6),
        "quad_fit_60": round(q60, 6),
    }


def final_values(trace: Iterable[TraceRecord]) -> dict[int, bytes]:
    trace = list(trace)
    values = dict(initial_contents(trace))
    for rec in trace:
        if rec.op == "W":
            values[rec.line] = rec.data
        else:
            values.setdefault(rec.line, ZERO_LINE)
    return values


def run(cfg: SimConfig, trace: Sequence[TraceRecord], modes: Iterable[str] = ALL_MODES,
        jobs: int = 1, check: bool = True) -> StatsReport:
    modes = [Mode(m).value for m in modes]
    trace = list(trace)
    initial = initial_contents(trace)
    args = [(m, cfg, trace, check, initial) for m in modes]
    if jobs > 1 and len(modes) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_args, args))
    else:
        results = [simulate(*a) for a in args]
    report = StatsReport({r.mode: r for r in results})
    report.histogram = compressibility_histogram(final_values(trace))
    return report
