"""Control plane composition: one object wiring all governance layers.

A single re-entrant lock guards every mutation, which makes the whole
plane linearizable (stronger than each module's own contract, and easy
to reason about at desk scale). Reads take the same lock briefly and see
consistent snapshots. Composite operations (kill switch, decommission)
stage their audit evidence and commit it in one all-or-nothing batch.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from .audit import AuditLog
from .clock import WallClock
from .ids import IdSource
from .lifecycle import KillReport, LifecycleManager, TerminationReport
from .mediation import Mediator, ToolCallRequest
from .memory import MemoryStore, RetentionClasses
from .metrics import (
    FeatureFlags,
    INCIDENT_CATEGORIES,
    KpiSnapshot,
    MaturityAssessment,
    MaturityThresholds,
    assess_maturity,
    compute_snapshot,
)
from .policy import KillSwitchTrigger, PolicyEngine, TelemetryEvent
from .registry import AgentRegistry, CapabilityCatalog


@dataclass(frozen=True)
class FleetState:
    """Primitive-valued snapshot of registry, credentials and memory,
    comparable field-for-field against an event-log reconstruction."""

    agents: dict[str, dict[str, Any]]
    credentials: dict[str, dict[str, Any]]
    memory: dict[str, dict[str, Any]]


class ControlPlane:
    def __init__(self, catalog: CapabilityCatalog, retention: RetentionClasses,
                 clock=None, id_seed: int | None = None,
                 audit_path: str | Path | None = None,
                 executor: Callable[[ToolCallRequest], None] | None = None,
                 triggers: Iterable[KillSwitchTrigger] = ()):
        self.lock = threading.RLock()
        self.clock = clock if clock is not None else WallClock()
        self.ids = IdSource(self.clock, seed=id_seed)
        self.audit = AuditLog(audit_path, clock=self.clock)
        self.registry = AgentRegistry(catalog, self.audit, self.clock, self.ids, self.lock)
        self.policy = PolicyEngine(self.audit, self.clock, self.ids, self.lock)
        self.policy.triggers = list(triggers)
        self.mediator = Mediator(self.registry, self.policy, self.audit, self.clock,
                                 self.ids, self.lock, executor=executor)
        self.memory = MemoryStore(retention, self.audit, self.clock, self.ids, self.lock)
        self.lifecycle = LifecycleManager(self.registry, self.memory, self.mediator,
                                          self.audit, self.clock, self.lock)

    # -- guardrail composites --------------------------------------------

    def fire_kill_switch(self, agent_id: str, trigger_id: str, reason: str,
                         operator: str) -> KillReport:
        return self.lifecycle.kill_switch(agent_id, trigger_id, reason, operator)

    def decommission(self, agent_id: str, reason: str, operator: str) -> TerminationReport:
        return self.lifecycle.decommission(agent_id, reason, operator)

    def check_triggers(self, agent_id: str,
                       window_seconds: int | None = None) -> list[KillSwitchTrigger]:
        """Evaluate configured triggers over the recent audit tail."""
        with self.lock:
            now = self.clock.now()
            cutoff = None if window_seconds is None else now - window_seconds
            window = []
            for event in self.audit.events():
                if cutoff is not None and event.timestamp < cutoff:
                    continue
                telemetry = _telemetry_from_event(event)
                if telemetry is not None:
                    window.append(telemetry)
            return self.policy.check_triggers(agent_id, window)

    # -- incidents and the ungoverned baseline -----------------------------

    def report_incident(self, agent_id: str, category: str, severity: int,
                        operator: str, workflow_id: str | None = None) -> None:
        if category not in INCIDENT_CATEGORIES:
            raise ValueError(f"incident category must be one of {INCIDENT_CATEGORIES}")
        if severity < 1:
            raise ValueError("severity must be >= 1")
        with self.lock:
            self.registry.get(agent_id)
            self.audit.append("incident", operator, {
                "agent_id": agent_id,
                "category": category,
                "severity": severity,
                "workflow_id": workflow_id,
            })

    def record_ungoverned_call(self, agent_id: str, tool: str,
                               resources: Iterable[tuple[str, bool]] = (),
                               workflow_id: str | None = None, intent: str = "",
                               channel: str = "local") -> str:
        """Evidence of a tool call that bypassed mediation (baseline fleets
        without governance). Recorded, never evaluated or executed."""
        with self.lock:
            request_id = self.ids.new("req")
            self.audit.append("tool_call", agent_id, {
                "governed": False,
                "request": {
                    "request_id": request_id,
                    "agent_id": agent_id,
                    "credential_id": None,
                    "tool": tool,
                    "resources": [[str(c), bool(p)] for c, p in resources],
                    "workflow_id": workflow_id,
                    "intent": intent,
                    "submitted_at": self.clock.now(),
                    "channel": channel,
                },
            })
            return request_id

    def record_ungoverned_read(self, agent_id: str, shard_key: str,
                               categories_returned: Iterable[str], phi_returned: bool,
                               count: int, workflow_id: str | None = None) -> None:
        """Evidence of an unmediated memory read (baseline fleets); the
        categories may exceed the agent's declared scopes."""
        with self.lock:
            self.audit.append("memory_read", agent_id, {
                "governed": False,
                "agent_id": agent_id,
                "shard_key": shard_key,
                "categories_requested": None,
                "categories_returned": sorted(categories_returned),
                "phi_returned": bool(phi_returned),
                "count": int(count),
                "now": self.clock.now(),
                "workflow_id": workflow_id,
            })

    # -- memory by agent id -------------------------------------------------

    def write_memory(self, agent_id: str, shard_key: str, data_category: str,
                     phi: bool, payload: bytes, ttl: int,
                     workflow_id: str | None = None) -> str:
        with self.lock:
            record = self.registry.get(agent_id)
            return self.memory.write_memory(record, shard_key, data_category, phi,
                                            payload, ttl, workflow_id=workflow_id)

    def read_memory(self, agent_id: str, shard_key: str,
                    categories: Iterable[str] | None = None, now: int | None = None,
                    workflow_id: str | None = None):
        with self.lock:
            record = self.registry.get(agent_id)
            return self.memory.read_memory(record, shard_key, categories, now,
                                           workflow_id=workflow_id)

    def freeze_memories(self, agent_id: str) -> int:
        with self.lock:
            record = self.registry.get(agent_id)
            return self.memory.freeze_memories(record)

    # -- KPIs ---------------------------------------------------------------

    def kpi(self, start: int, end: int) -> KpiSnapshot:
        with self.lock:
            return compute_snapshot(self.audit.events(), start, end)

    def assess(self, start: int, end: int, features: FeatureFlags,
               thresholds: MaturityThresholds = MaturityThresholds()) -> MaturityAssessment:
        return assess_maturity(self.kpi(start, end), features, thresholds)

    def snapshot_kpis(self, start: int, end: int, actor: str) -> KpiSnapshot:
        """Compute and record a snapshot as audit evidence."""
        with self.lock:
            snapshot = self.kpi(start, end)
            self.audit.append("kpi_snapshot", actor, snapshot.payload())
            return snapshot

    # -- state snapshot -------------------------------------------------------

    def live_state(self) -> FleetState:
        with self.lock:
            agents = {}
            for record in self.registry.agents():
                agents[record.agent_id] = {
                    "persona": record.persona,
                    "domain_class": record.domain_class.value,
                    "scope_of_practice": sorted(record.scope_of_practice),
                    "allowed_tools": sorted(record.allowed_tools),
                    "data_scopes": sorted(record.data_scopes),
                    "state": record.state.value,
                    "accountable_owner": record.accountable_owner,
                    "owner_active": record.owner_active,
                    "liability_owner": record.liability_owner,
                    "expiration": record.expiration,
                    "registered_at": record.registered_at,
                    "baseline": record.baseline.payload() if record.baseline else None,
                }
            credentials = {}
            for record in self.registry.agents():
                for credential in self.registry.credentials_for(record.agent_id):
                    credentials[credential.credential_id] = {
                        "agent_id": credential.agent_id,
                        "issued_at": credential.issued_at,
                        "expires_at": credential.expires_at,
                        "status": credential.status,
                        "revoked_at": credential.revoked_at,
                        "scope_claims": sorted(credential.scope_claims),
                    }
            memory = {}
            for entry in self.memory.entries():
                memory[entry.entry_id] = {
                    "agent_id": entry.agent_id,
                    "shard_key": entry.shard_key,
                    "data_category": entry.data_category,
                    "phi": entry.phi,
                    "payload_digest": entry.payload_digest,
                    "created_at": entry.created_at,
                    "ttl": entry.ttl,
                    "frozen": entry.frozen,
                    "purged": entry.purged,
                }
            return FleetState(agents=agents, credentials=credentials, memory=memory)

    def close(self) -> None:
        self.audit.close()


def _telemetry_from_event(event) -> TelemetryEvent | None:
    """Map an audit event onto trigger-window telemetry, if relevant."""
    payload = event.payload
    if event.kind == "decision":
        return TelemetryEvent(
            kind="decision",
            timestamp=event.timestamp,
            agent_id=payload["request"]["agent_id"],
            effect=payload["decision"]["effect"],
        )
    if event.kind == "incident":
        return TelemetryEvent(
            kind="incident",
            timestamp=event.timestamp,
            agent_id=payload["agent_id"],
            severity=payload["severity"],
        )
    if event.kind == "drift":
        return TelemetryEvent(
            kind="drift", timestamp=event.timestamp, agent_id=payload["agent_id"])
    if event.kind == "owner_departed":
        return TelemetryEvent(
            kind="owner_departed", timestamp=event.timestamp,
            agent_id=payload["agent_id"])
    return None
