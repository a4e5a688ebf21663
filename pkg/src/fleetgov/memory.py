"""Shard-scoped, TTL-bounded agent memory with freeze-on-decommission.

Reads return the minimum necessary: only the exact shard asked for, only
data categories inside the caller's declared scopes, only entries still
inside their TTL. Writes are refused outside the agent's scopes or past
the data category's retention class. Expired payloads are destroyed but
leave digest-only tombstones, so deletion itself stays auditable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from . import canonical
from .errors import (
    AgentNotActive,
    InvalidState,
    ParseError,
    ScopeViolation,
    TtlExceedsRetentionClass,
)
from .lifecycle import LifecycleState

if TYPE_CHECKING:
    from .audit import AuditLog
    from .ids import IdSource
    from .registry import AgentRecord


@dataclass
class MemoryEntry:
    entry_id: str
    agent_id: str
    shard_key: str
    data_category: str
    phi: bool
    payload_digest: bytes
    payload: bytes
    created_at: int
    ttl: int
    frozen: bool = False
    purged: bool = False        # tombstone: payload destroyed, digest kept

    def expired(self, now: int) -> bool:
        return self.created_at + self.ttl <= now


class RetentionClasses:
    """Per-data-category maximum TTLs.

    File format (UTF-8, one record per line)::

        # comment
        data_category: 365d

    ``*`` sets a default for categories not listed. Durations accept
    d/h/m/s suffixes.
    """

    def __init__(self, limits: dict[str, int], default: int | None = None):
        self._limits = dict(limits)
        self._default = default

    @classmethod
    def parse(cls, text: str) -> "RetentionClasses":
        from .clock import parse_duration
        limits: dict[str, int] = {}
        default: int | None = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ParseError("expected 'category: max_ttl'", line=lineno,
                                 field="category")
            name, _, ttl_text = line.partition(":")
            name = name.strip()
            ttl_text = ttl_text.strip()
            if not name:
                raise ParseError("empty category", line=lineno, field="category")
            try:
                ttl = parse_duration(ttl_text)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, field="max_ttl") from exc
            if name == "*":
                default = ttl
            elif name in limits:
                raise ParseError(f"category {name!r} defined twice", line=lineno,
                                 field="category")
            else:
                limits[name] = ttl
        return cls(limits, default)

    @classmethod
    def load(cls, path: str | Path) -> "RetentionClasses":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def max_ttl(self, category: str) -> int | None:
        return self._limits.get(category, self._default)


class MemoryStore:
    def __init__(self, retention: RetentionClasses, audit: "AuditLog", clock,
                 ids: "IdSource", lock):
        self._retention = retention
        self._audit = audit
        self._clock = clock
        self._ids = ids
        self._lock = lock
        self._entries: dict[str, MemoryEntry] = {}

    # -- writes ------------------------------------------------------

    def write_memory(self, agent: "AgentRecord", shard_key: str, data_category: str,
                     phi: bool, payload: bytes, ttl: int,
                     workflow_id: str | None = None) -> str:
        with self._lock:
            if agent.state is not LifecycleState.ACTIVE:
                raise AgentNotActive(f"agent {agent.agent_id} is {agent.state.value}")
            if data_category not in agent.data_scopes:
                raise ScopeViolation(
                    f"category {data_category!r} outside agent data scopes "
                    f"{sorted(agent.data_scopes)}")
            if phi and not shard_key:
                raise ScopeViolation("phi entries require a shard_key")
            if ttl <= 0:
                raise TtlExceedsRetentionClass("ttl must be positive")
            limit = self._retention.max_ttl(data_category)
            if limit is None:
                raise TtlExceedsRetentionClass(
                    f"no retention class configured for category {data_category!r}")
            if ttl > limit:
                raise TtlExceedsRetentionClass(
                    f"ttl {ttl}s exceeds retention class {limit}s for "
                    f"category {data_category!r}")
            now = self._clock.now()
            entry = MemoryEntry(
                entry_id=self._ids.new("mem"),
                agent_id=agent.agent_id,
                shard_key=shard_key,
                data_category=data_category,
                phi=phi,
                payload_digest=canonical.digest_bytes(payload),
                payload=payload,
                created_at=now,
                ttl=ttl,
            )
            self._entries[entry.entry_id] = entry
            self._audit.append("memory_write", agent.agent_id, {
                "agent_id": agent.agent_id,
                "entry_id": entry.entry_id,
                "shard_key": shard_key,
                "data_category": data_category,
                "phi": phi,
                "payload_digest": entry.payload_digest,
                "created_at": now,
                "ttl": ttl,
                "workflow_id": workflow_id,
            })
            return entry.entry_id

    # -- reads -------------------------------------------------------

    def read_memory(self, agent: "AgentRecord", shard_key: str,
                    categories: Iterable[str] | None = None, now: int | None = None,
                    workflow_id: str | None = None) -> list[MemoryEntry]:
        """Minimum-necessary read: exact shard, in-scope categories, live TTL."""
        with self._lock:
            if agent.state is not LifecycleState.ACTIVE:
                raise AgentNotActive(f"agent {agent.agent_id} is {agent.state.value}")
            if now is None:
                now = self._clock.now()
            allowed = agent.data_scopes if categories is None \
                else agent.data_scopes & frozenset(categories)
            results = [
                entry for entry in self._entries.values()
                if not entry.purged and not entry.frozen
                and entry.shard_key == shard_key
                and entry.data_category in allowed
                and not entry.expired(now)
            ]
            results.sort(key=lambda e: e.entry_id)
            self._audit.append("memory_read", agent.agent_id, {
                "agent_id": agent.agent_id,
                "shard_key": shard_key,
                "categories_requested": sorted(categories) if categories is not None else None,
                "categories_returned": sorted({e.data_category for e in results}),
                "phi_returned": any(e.phi for e in results),
                "count": len(results),
                "now": now,
                "workflow_id": workflow_id,
            })
            return results

    # -- retention ------------------------------------------------------

    def expire_memories(self, now: int | None = None) -> int:
        """Destroy payloads past TTL; keep digest-only tombstones."""
        with self._lock:
            if now is None:
                now = self._clock.now()
            purged = []
            for entry in self._entries.values():
                if not entry.purged and entry.expired(now):
                    entry.payload = b""
                    entry.purged = True
                    purged.append(entry)
            if purged:
                purged.sort(key=lambda e: e.entry_id)
                self._audit.append("memory_purge", "system", {
                    "now": now,
                    "count": len(purged),
                    "purged": [
                        {
                            "entry_id": e.entry_id,
                            "agent_id": e.agent_id,
                            "payload_digest": e.payload_digest,
                            "frozen": e.frozen,
                        }
                        for e in purged
                    ],
                })
            return len(purged)

    # -- freeze ------------------------------------------------------------

    def freeze_memories(self, agent: "AgentRecord") -> int:
        """Freeze a contained agent's entries; afterwards they are only
        reachable through the audit-export path, never read_memory."""
        with self._lock:
            if agent.state not in (LifecycleState.SUSPENDED, LifecycleState.DECOMMISSIONED):
                raise InvalidState(
                    f"agent {agent.agent_id} is {agent.state.value}; freeze requires "
                    "Suspended or Decommissioned")
            frozen = self.freeze_agent_entries_unlogged(agent.agent_id)
            if frozen:
                self._audit.append("memory_freeze", "system", {
                    "agent_id": agent.agent_id,
                    "entry_ids": [e.entry_id for e in frozen],
                    "count": len(frozen),
                })
            return len(frozen)

    # -- audit-export path ---------------------------------------------

    def export_for_audit(self, agent_id: str | None = None) -> list[MemoryEntry]:
        """Evidence access: every entry including frozen ones and tombstones."""
        with self._lock:
            entries = [e for e in self._entries.values()
                       if agent_id is None or e.agent_id == agent_id]
            entries.sort(key=lambda e: e.entry_id)
            return entries

    def export_tombstones(self) -> str:
        """Newline-delimited deletion evidence, fixed field order."""
        with self._lock:
            lines = []
            for entry in sorted(self._entries.values(), key=lambda e: e.entry_id):
                if entry.purged:
                    lines.append("\t".join((
                        entry.entry_id,
                        entry.agent_id,
                        entry.data_category,
                        entry.payload_digest.hex(),
                        str(entry.created_at),
                        str(entry.ttl),
                        "frozen" if entry.frozen else "-",
                    )))
            return "\n".join(lines) + ("\n" if lines else "")

    def counts(self, agent_id: str | None = None) -> dict[str, int]:
        with self._lock:
            live = frozen_live = tombstones = 0
            for entry in self._entries.values():
                if agent_id is not None and entry.agent_id != agent_id:
                    continue
                if entry.purged:
                    tombstones += 1
                elif entry.frozen:
                    frozen_live += 1
                else:
                    live += 1
            return {"live": live, "frozen_live": frozen_live, "tombstones": tombstones}

    # -- internals used by lifecycle (caller holds the lock, logs itself) --

    def freeze_agent_entries_unlogged(self, agent_id: str) -> list[MemoryEntry]:
        frozen = []
        for entry in self._entries.values():
            if entry.agent_id == agent_id and not entry.frozen:
                entry.frozen = True
                frozen.append(entry)
        frozen.sort(key=lambda e: e.entry_id)
        return frozen

    def snapshot_frozen_flags(self, agent_id: str) -> list[tuple[str, bool]]:
        return [(e.entry_id, e.frozen) for e in self._entries.values()
                if e.agent_id == agent_id]

    def restore_frozen_flags(self, agent_id: str,
                             snapshot: list[tuple[str, bool]]) -> None:
        for entry_id, frozen in snapshot:
            self._entries[entry_id].frozen = frozen

    def entries(self) -> list[MemoryEntry]:
        with self._lock:
            return list(self._entries.values())

    def entry(self, entry_id: str) -> MemoryEntry | None:
        with self._lock:
            return self._entries.get(entry_id)
