"""Line Location Predictor backed by a Last Compressibility Table."""

from __future__ import annotations

from .common import LINE_SIZE, Level

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class LineLocationPredictor:
    """Direct-mapped table of 2-bit last-seen compressibility per hashed page.

    ``update_policy`` is ``"every"`` (record the observed level on every
    resolved read) or ``"mispredict"`` (only when the prediction was wrong).
    """

    def __init__(self, entries: int = 512, page_size: int = 4096, seed: int = 0,
                 update_policy: str = "every"):
        if entries <= 0:
            raise ValueError("LCT needs at least one entry")
        if page_size % LINE_SIZE:
            raise ValueError("page size must be a multiple of the line size")
        if update_policy not in ("every", "mispredict"):
            raise ValueError(f"unknown LCT update policy {update_policy!r}")
        self.entries = entries
        self.lines_per_page = page_size // LINE_SIZE
        self.salt = (seed * _GOLDEN) & _MASK64
        self.update_policy = update_policy
        self.table = [Level.UNCOMP] * entries
        self.predictions = 0
        self.correct = 0

    def index(self, line_addr: int) -> int:
        page = line_addr // self.lines_per_page
        h = ((page ^ self.salt) * _GOLDEN) & _MASK64
        return (h >> 32) % self.entries

    def predict(self, line_addr: int) -> Level:
        return self.table[self.index(line_addr)]

    def update(self, line_addr: int, observed: Level, predicted: Level | None = None) -> None:
        if self.update_policy == "mispredict" and predicted is not None and predicted == observed:
            return
        self.table[self.index(line_addr)] = Level(observed)

    def record(self, hit: bool) -> None:
        self.predictions += 1
        self.correct += hit

    @property
    def accuracy(self) -> float:
        return self.correct / self.predictions if self.predictions else 1.0

    @property
    def storage_bytes(self) -> int:
        return self.entries * 2 // 8
