import random
import struct

import pytest

from cramsim import config


def words_line(words):
    return struct.pack("<16I", *[w & 0xFFFFFFFF for w in words])


def structured_line(rng: random.Random) -> bytes:
    """Line whose words are drawn from every FPC pattern class and BDI-friendly shapes."""
    kind = rng.randrange(6)
    if kind == 0:
        return rng.randbytes(64)
    if kind == 1:
        base = rng.getrandbits(64)
        width = rng.choice((1, 2, 4))
        vals = [(base + rng.randint(-(1 << (8 * width - 1)), (1 << (8 * width - 1)) - 1)) % (1 << 64)
                for _ in range(8)]
        return b"".join(v.to_bytes(8, "little") for v in vals)
    if kind == 2:
        base = rng.getrandbits(32)
        return b"".join(((base + rng.randint(-128, 127)) % (1 << 32)).to_bytes(4, "little")
                        for _ in range(16))
    words = []
    for _ in range(16):
        c = rng.randrange(8)
        if c == 0:
            words.append(0)
        elif c == 1:
            words.append(rng.randint(-8, 7))
        elif c == 2:
            words.append(rng.randint(-128, 127))
        elif c == 3:
            words.append(rng.randint(-32768, 32767))
        elif c == 4:
            words.append(rng.getrandbits(16) << 16)
        elif c == 5:
            words.append(((rng.randint(-128, 127) & 0xFFFF) << 16) | (rng.randint(-128, 127) & 0xFFFF))
        elif c == 6:
            words.append(rng.getrandbits(8) * 0x01010101)
        else:
            words.append(rng.getrandbits(32))
    return words_line(words)


@pytest.fixture
def small_cfg():
    return config.from_mapping({"llc_capacity": 64 << 10, "llc_assoc": 16})


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
