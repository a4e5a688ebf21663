"""Append-only, hash-chained audit log with verification and evidence export.

Every governance event lands here, in one totally ordered sequence. Each
event's ``hash`` covers the previous event's hash, so any byte of history
that changes after the fact breaks the chain at exactly that sequence
number:

    hash = SHA256(prev_hash || seq_u64be || timestamp_i64be
                  || len(kind)_u32be || kind || len(actor)_u32be || actor
                  || payload_digest)

``payload_digest`` is SHA-256 over the canonical encoding of the payload
(see :mod:`fleetgov.canonical`). Event 1 links to 32 zero bytes.

On disk the log is a sequence of length-prefixed binary records, each
carrying the chain fields plus the canonical payload bytes, so state can
be reconstructed from the log alone and an external verifier can check
integrity without this package's in-memory objects.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import canonical
from .errors import CorruptLog, RangeOutOfBounds, StorageFailure

GENESIS = b"\x00" * 32

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_I64 = struct.Struct(">q")

# Complete event-kind vocabulary. Appending an unknown kind is a bug in
# the caller, not data.
KINDS = frozenset({
    "registration",
    "approval",
    "owner_departed",
    "credential_issued",
    "credential_revoked",
    "decision",
    "tool_call",
    "human_verdict",
    "message",
    "conflict",
    "kill_switch",
    "memory_write",
    "memory_read",
    "memory_purge",
    "memory_freeze",
    "transition",
    "drift",
    "incident",
    "termination",
    "policy_loaded",
    "kpi_snapshot",
})


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: int
    kind: str
    actor: str
    payload_digest: bytes
    prev_hash: bytes
    hash: bytes
    payload: dict[str, Any]


@dataclass(frozen=True)
class ChainVerification:
    ok: bool
    first_bad_seq: int | None = None
    problem: str | None = None


def chain_hash(prev_hash: bytes, seq: int, timestamp: int, kind: str, actor: str,
               payload_digest: bytes) -> bytes:
    kind_raw = kind.encode("utf-8")
    actor_raw = actor.encode("utf-8")
    material = b"".join((
        prev_hash,
        _U64.pack(seq),
        _I64.pack(timestamp),
        _U32.pack(len(kind_raw)), kind_raw,
        _U32.pack(len(actor_raw)), actor_raw,
        payload_digest,
    ))
    return canonical.digest_bytes(material)


def encode_record(event: AuditEvent) -> bytes:
    """Length-prefixed on-disk record; layout documented in docs/formats.md."""
    kind_raw = event.kind.encode("utf-8")
    actor_raw = event.actor.encode("utf-8")
    payload_raw = canonical.encode(event.payload)
    body = b"".join((
        _U64.pack(event.seq),
        _I64.pack(event.timestamp),
        _U32.pack(len(kind_raw)), kind_raw,
        _U32.pack(len(actor_raw)), actor_raw,
        event.payload_digest,
        event.prev_hash,
        event.hash,
        _U32.pack(len(payload_raw)), payload_raw,
    ))
    return _U32.pack(len(body)) + body


def decode_record(body: bytes) -> AuditEvent:
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(body):
            raise CorruptLog("truncated record")
        chunk = body[pos:pos + n]
        pos += n
        return chunk

    seq = _U64.unpack(take(8))[0]
    timestamp = _I64.unpack(take(8))[0]
    try:
        kind = take(_U32.unpack(take(4))[0]).decode("utf-8")
        actor = take(_U32.unpack(take(4))[0]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptLog(f"undecodable text field: {exc}") from exc
    payload_digest = take(32)
    prev_hash = take(32)
    hash_ = take(32)
    payload_raw = take(_U32.unpack(take(4))[0])
    if pos != len(body):
        raise CorruptLog("trailing bytes in record")
    try:
        payload = canonical.decode(payload_raw)
    except canonical.DecodeError as exc:
        raise CorruptLog(f"undecodable payload: {exc}") from exc
    if not isinstance(payload, dict):
        raise CorruptLog("payload is not a mapping")
    if canonical.digest_bytes(payload_raw) != payload_digest:
        raise CorruptLog("payload digest mismatch")
    return AuditEvent(seq, timestamp, kind, actor, payload_digest, prev_hash, hash_, payload)


def _verify_event(event: AuditEvent, expected_seq: int, expected_prev: bytes) -> str | None:
    """Return a problem description, or None if the event checks out."""
    if event.seq != expected_seq:
        return f"sequence break: expected {expected_seq}, found {event.seq}"
    if event.prev_hash != expected_prev:
        return "previous-hash link mismatch"
    recomputed = chain_hash(event.prev_hash, event.seq, event.timestamp, event.kind,
                            event.actor, event.payload_digest)
    if recomputed != event.hash:
        return "chain hash mismatch"
    if canonical.digest(event.payload) != event.payload_digest:
        return "payload digest mismatch"
    return None


class AuditLog:
    """Single-sequencer log. Appends are serialized by the plane's lock;
    an extra internal lock is unnecessary because every caller funnels
    through that guard."""

    def __init__(self, path: str | Path | None = None, clock=None):
        self._events: list[AuditEvent] = []
        self._path = Path(path) if path is not None else None
        self._clock = clock
        self._file = None
        if self._path is not None:
            if self._path.exists():
                self._events = list(read_log_file(self._path))
            self._file = open(self._path, "ab")

    # -- core -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._events)

    @property
    def last_hash(self) -> bytes:
        return self._events[-1].hash if self._events else GENESIS

    @property
    def last_seq(self) -> int:
        return len(self._events)

    def events(self) -> list[AuditEvent]:
        return list(self._events)

    def event(self, seq: int) -> AuditEvent:
        if not 1 <= seq <= len(self._events):
            raise RangeOutOfBounds(f"seq {seq} outside log [1, {len(self._events)}]")
        return self._events[seq - 1]

    def _build(self, seq: int, prev: bytes, timestamp: int, kind: str, actor: str,
               payload: dict[str, Any]) -> AuditEvent:
        if kind not in KINDS:
            raise ValueError(f"unknown audit event kind {kind!r}")
        payload_digest = canonical.digest(payload)
        hash_ = chain_hash(prev, seq, timestamp, kind, actor, payload_digest)
        return AuditEvent(seq, timestamp, kind, actor, payload_digest, prev, hash_, payload)

    def _persist(self, raw: bytes) -> None:
        if self._file is None:
            return
        try:
            self._file.write(raw)
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            raise StorageFailure(f"audit write failed: {exc}") from exc

    def append(self, kind: str, actor: str, payload: dict[str, Any],
               timestamp: int | None = None) -> AuditEvent:
        """Append one event; durable before return."""
        return self.append_batch([(kind, actor, payload)], timestamp=timestamp)[0]

    def append_batch(self, entries: Iterable[tuple[str, str, dict[str, Any]]],
                     timestamp: int | None = None) -> list[AuditEvent]:
        """Append several events all-or-nothing (one write, one fsync).

        Used by composite operations (kill switch, decommission) so a
        storage failure can never leave half the evidence behind.
        """
        if timestamp is None:
            if self._clock is None:
                raise ValueError("no timestamp and no clock configured")
            timestamp = self._clock.now()
        events: list[AuditEvent] = []
        prev = self.last_hash
        seq = self.last_seq
        for kind, actor, payload in entries:
            seq += 1
            event = self._build(seq, prev, timestamp, kind, actor, payload)
            events.append(event)
            prev = event.hash
        raw = b"".join(encode_record(e) for e in events)
        self._persist(raw)
        self._events.extend(events)
        return events

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    # -- verification -------------------------------------------------

    def verify_chain(self, from_seq: int = 1, to_seq: int | None = None) -> ChainVerification:
        """Recompute every link in [from_seq, to_seq]; report the first bad seq."""
        if to_seq is None:
            to_seq = len(self._events)
        if from_seq < 1 or to_seq > len(self._events) or (self._events and from_seq > to_seq):
            raise RangeOutOfBounds(
                f"range [{from_seq}, {to_seq}] outside log [1, {len(self._events)}]")
        expected_prev = GENESIS if from_seq == 1 else self._events[from_seq - 2].hash
        for seq in range(from_seq, to_seq + 1):
            event = self._events[seq - 1]
            problem = _verify_event(event, seq, expected_prev)
            if problem:
                return ChainVerification(False, seq, problem)
            expected_prev = event.hash
        return ChainVerification(True)

    # -- export -------------------------------------------------------

    def select(self, agent_id: str | None = None, start: int | None = None,
               end: int | None = None, kinds: Iterable[str] | None = None) -> list[AuditEvent]:
        kind_set = frozenset(kinds) if kinds is not None else None
        out = []
        for event in self._events:
            if start is not None and event.timestamp < start:
                continue
            if end is not None and event.timestamp > end:
                continue
            if kind_set is not None and event.kind not in kind_set:
                continue
            if agent_id is not None and event.actor != agent_id \
                    and event.payload.get("agent_id") != agent_id:
                continue
            out.append(event)
        return out

    def export_bundle(self, agent_id: str | None = None, start: int | None = None,
                      end: int | None = None, kinds: Iterable[str] | None = None) -> bytes:
        """Deterministic evidence bundle: header + matching records.

        Each record is self-verifiable (stored prev_hash, recomputable
        hash and payload digest); the header pins the log's terminal seq
        and hash at export time so the bundle can be anchored against
        the full log independently. Identical filters over an identical
        log yield byte-identical bundles.
        """
        matched = self.select(agent_id=agent_id, start=start, end=end, kinds=kinds)
        records = b"".join(encode_record(e) for e in matched)
        header = {
            "format": BUNDLE_FORMAT,
            "filter": {
                "agent_id": agent_id,
                "start": start,
                "end": end,
                "kinds": sorted(kinds) if kinds is not None else None,
            },
            "count": len(matched),
            "first_seq": matched[0].seq if matched else None,
            "last_seq": matched[-1].seq if matched else None,
            "log_terminal_seq": self.last_seq,
            "log_terminal_hash": self.last_hash,
            "records_digest": canonical.digest_bytes(records),
        }
        header_raw = canonical.encode(header)
        return BUNDLE_MAGIC + _U32.pack(len(header_raw)) + header_raw + records


BUNDLE_MAGIC = b"FGBUNDLE\n"
BUNDLE_FORMAT = "fleetgov-evidence-bundle/1"


@dataclass(frozen=True)
class BundleVerification:
    ok: bool
    count: int = 0
    first_bad_seq: int | None = None
    problem: str | None = None
    header: dict[str, Any] | None = None
    events: tuple[AuditEvent, ...] = ()


def iter_records(data: bytes, offset: int = 0) -> Iterator[AuditEvent]:
    pos = offset
    while pos < len(data):
        if pos + 4 > len(data):
            raise CorruptLog("truncated record length")
        (length,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + length > len(data):
            raise CorruptLog("truncated record body")
        yield decode_record(data[pos:pos + length])
        pos += length


def verify_bundle(data: bytes) -> BundleVerification:
    """Standalone verifier: needs only the bundle bytes.

    Checks header shape, the whole-records digest, each record's payload
    digest and chain hash, and prev-hash linkage wherever records are
    sequence-adjacent.
    """
    if not data.startswith(BUNDLE_MAGIC):
        return BundleVerification(False, problem="not an evidence bundle (bad magic)")
    pos = len(BUNDLE_MAGIC)
    if pos + 4 > len(data):
        return BundleVerification(False, problem="truncated header length")
    (header_len,) = _U32.unpack_from(data, pos)
    pos += 4
    if pos + header_len > len(data):
        return BundleVerification(False, problem="truncated header")
    try:
        header = canonical.decode(data[pos:pos + header_len])
    except canonical.DecodeError as exc:
        return BundleVerification(False, problem=f"undecodable header: {exc}")
    if not isinstance(header, dict) or header.get("format") != BUNDLE_FORMAT:
        return BundleVerification(False, problem="unknown bundle format")
    pos += header_len
    records = data[pos:]
    if canonical.digest_bytes(records) != header.get("records_digest"):
        return BundleVerification(False, problem="records digest mismatch", header=header)

    events: list[AuditEvent] = []
    try:
        for event in iter_records(data, pos):
            recomputed = chain_hash(event.prev_hash, event.seq, event.timestamp,
                                    event.kind, event.actor, event.payload_digest)
            if recomputed != event.hash:
                return BundleVerification(False, len(events), event.seq,
                                          "chain hash mismatch", header, tuple(events))
            if canonical.digest(event.payload) != event.payload_digest:
                return BundleVerification(False, len(events), event.seq,
                                          "payload digest mismatch", header, tuple(events))
            if events and event.seq == events[-1].seq + 1 \
                    and event.prev_hash != events[-1].hash:
                return BundleVerification(False, len(events), event.seq,
                                          "adjacent prev-hash link mismatch", header,
                                          tuple(events))
            events.append(event)
    except CorruptLog as exc:
        bad = events[-1].seq + 1 if events else None
        return BundleVerification(False, len(events), bad, str(exc), header, tuple(events))

    if header.get("count") != len(events):
        return BundleVerification(False, len(events), None,
                                  "header count mismatch", header, tuple(events))
    return BundleVerification(True, len(events), header=header, events=tuple(events))


def read_log_file(path: str | Path) -> list[AuditEvent]:
    """Load records from disk; raises CorruptLog naming the bad seq."""
    data = Path(path).read_bytes()
    events: list[AuditEvent] = []
    try:
        for event in iter_records(data):
            events.append(event)
    except CorruptLog as exc:
        raise CorruptLog(f"record {len(events) + 1}: {exc}") from exc
    return events


def verify_log_file(path: str | Path) -> ChainVerification:
    """Stream a log file and verify it, tolerating framing damage.

    Any undecodable or mismatching record is reported at the sequence
    position where the damage begins (records verified so far + 1).
    """
    data = Path(path).read_bytes()
    pos = 0
    expected_prev = GENESIS
    seq = 0
    while pos < len(data):
        seq += 1
        try:
            if pos + 4 > len(data):
                raise CorruptLog("truncated record length")
            (length,) = _U32.unpack_from(data, pos)
            if pos + 4 + length > len(data):
                raise CorruptLog("truncated record body")
            event = decode_record(data[pos + 4:pos + 4 + length])
        except CorruptLog as exc:
            return ChainVerification(False, seq, str(exc))
        problem = _verify_event(event, seq, expected_prev)
        if problem:
            return ChainVerification(False, seq, problem)
        expected_prev = event.hash
        pos += 4 + length
    return ChainVerification(True)
