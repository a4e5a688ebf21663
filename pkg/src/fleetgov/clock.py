"""Time sources and duration parsing.

All timestamps in the control plane are integer seconds. Production
services run on :class:`WallClock`; simulations and tests run on
:class:`LogicalClock`, which only moves when explicitly advanced, so
TTL, expiry and latency arithmetic is exactly reproducible.
"""

from __future__ import annotations

import re
import time

_DURATION_RE = re.compile(r"^\s*(\d+)\s*(d|h|m|s)?\s*$")

_UNIT_SECONDS = {"d": 86400, "h": 3600, "m": 60, "s": 1, None: 1}


class LogicalClock:
    """Deterministic clock: starts at ``start`` and moves only via advance()."""

    def __init__(self, start: int = 0):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self._now += int(seconds)
        return self._now


class WallClock:
    """Real time, truncated to whole seconds."""

    def now(self) -> int:
        return int(time.time())

    def advance(self, seconds: int) -> int:
        raise ValueError("wall clock cannot be advanced manually")


def parse_duration(text: str | int) -> int:
    """Parse ``90d`` / ``12h`` / ``30m`` / ``45s`` / bare integers to seconds."""
    if isinstance(text, int):
        value = text
    else:
        match = _DURATION_RE.match(text)
        if not match:
            raise ValueError(f"invalid duration {text!r} (expected e.g. 90d, 12h, 30m, 45s)")
        value = int(match.group(1)) * _UNIT_SECONDS[match.group(2)]
    if value < 0:
        raise ValueError("duration must be >= 0")
    return value
