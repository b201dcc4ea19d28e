"""Unit conventions and conversions.

Internal computation runs in MAC (multiply-accumulate), words, and seconds.
FLOP appears only at I/O boundaries: scaling-law inputs, report fields and
CLI/API payloads are tagged FLOP, and 1 MAC = 2 FLOP.
"""

FLOP_PER_MAC = 2.0

#: Three months = a quarter of a Julian year, in seconds (≈ 7.889e6).
THREE_MONTHS_S = 365.25 * 86400.0 / 4.0


def flop_to_mac(flop: float) -> float:
    return flop / FLOP_PER_MAC


def mac_to_flop(mac: float) -> float:
    return mac * FLOP_PER_MAC
