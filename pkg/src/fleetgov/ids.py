"""Identifier generation.

Identifiers are 128 bits rendered as 32 lowercase hex digits: the first
64 bits are the issuing clock's timestamp (big-endian seconds) and the
last 64 bits are random. Lexicographic order therefore follows issue
time, which keeps audit cross-references stable, and identifiers are
never reused after decommissioning. A short entity prefix ("agt", "crd",
...) makes logs readable.

The random half comes from :class:`~fleetgov.rng.SplitMix64` when a seed
is supplied (simulations; byte-identical logs) and from ``os.urandom``
otherwise.
"""

from __future__ import annotations

import os

from .rng import SplitMix64


class IdSource:
    def __init__(self, clock, seed: int | None = None):
        self._clock = clock
        self._rng = SplitMix64(seed) if seed is not None else None

    def _random_u64(self) -> int:
        if self._rng is not None:
            return self._rng.next_u64()
        return int.from_bytes(os.urandom(8), "big")

    def new(self, prefix: str) -> str:
        ts = self._clock.now() & ((1 << 64) - 1)
        return f"{prefix}-{ts:016x}{self._random_u64():016x}"
