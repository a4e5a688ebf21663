"""Agent lifecycle: state machine, expiry sweeps, drift detection, decommission.

The state machine is a fixed table; nothing outside it is reachable:

    Requested ──approve──▶ Approved ──provision──▶ Provisioned ──activate──▶ Active
    Active ──suspend──▶ Suspended ──reactivate──▶ Active
    Active / Suspended ──decommission──▶ Decommissioned   (terminal)

Decommissioning is the atomic triad: credentials revoked, memory frozen,
termination evidence written. Either all of it lands in the audit log or
none of it does and the agent is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping

from . import canonical
from .errors import (
    ExpirationInPast,
    InvalidState,
    InvalidTransition,
    MissingOwner,
    NoBaseline,
)

if TYPE_CHECKING:
    from .audit import AuditLog
    from .mediation import Mediator
    from .memory import MemoryStore
    from .registry import AgentRegistry


class LifecycleState(str, Enum):
    REQUESTED = "Requested"
    APPROVED = "Approved"
    PROVISIONED = "Provisioned"
    ACTIVE = "Active"
    SUSPENDED = "Suspended"
    DECOMMISSIONED = "Decommissioned"


class LifecycleEvent(str, Enum):
    APPROVE = "approve"
    PROVISION = "provision"
    ACTIVATE = "activate"
    SUSPEND = "suspend"
    REACTIVATE = "reactivate"
    DECOMMISSION = "decommission"


TRANSITIONS: dict[tuple[LifecycleState, LifecycleEvent], LifecycleState] = {
    (LifecycleState.REQUESTED, LifecycleEvent.APPROVE): LifecycleState.APPROVED,
    (LifecycleState.APPROVED, LifecycleEvent.PROVISION): LifecycleState.PROVISIONED,
    (LifecycleState.PROVISIONED, LifecycleEvent.ACTIVATE): LifecycleState.ACTIVE,
    (LifecycleState.ACTIVE, LifecycleEvent.SUSPEND): LifecycleState.SUSPENDED,
    (LifecycleState.ACTIVE, LifecycleEvent.DECOMMISSION): LifecycleState.DECOMMISSIONED,
    (LifecycleState.SUSPENDED, LifecycleEvent.REACTIVATE): LifecycleState.ACTIVE,
    (LifecycleState.SUSPENDED, LifecycleEvent.DECOMMISSION): LifecycleState.DECOMMISSIONED,
}

# Dimensions compared against the approved baseline.
BASELINE_DIMENSIONS = ("policy_version", "model_id", "prompt_hash", "config_hash")


@dataclass(frozen=True)
class DriftFinding:
    agent_id: str
    detected_at: int
    dimensions: frozenset[str]
    observed: dict[str, Any]
    baseline_policy_version: int

    def payload(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "detected_at": self.detected_at,
            "dimensions": sorted(self.dimensions),
            "observed": dict(self.observed),
            "baseline_policy_version": self.baseline_policy_version,
        }


@dataclass(frozen=True)
class KillReport:
    agent_id: str
    trigger_id: str
    reason: str
    revoked_credentials: int
    cancelled_pending: int
    fired_at: int

    def payload(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "trigger_id": self.trigger_id,
            "reason": self.reason,
            "revoked_credentials": self.revoked_credentials,
            "cancelled_pending": self.cancelled_pending,
            "fired_at": self.fired_at,
        }


@dataclass(frozen=True)
class TerminationReport:
    agent_id: str
    reason: str
    initiated_by: str
    revoked_credentials: int
    frozen_entries: int
    final_decision_log_digest: bytes
    completed_at: int

    def payload(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "reason": self.reason,
            "initiated_by": self.initiated_by,
            "revoked_credentials": self.revoked_credentials,
            "frozen_entries": self.frozen_entries,
            "final_decision_log_digest": self.final_decision_log_digest,
            "completed_at": self.completed_at,
        }


class LifecycleManager:
    def __init__(self, registry: "AgentRegistry", memory: "MemoryStore",
                 mediator: "Mediator", audit: "AuditLog", clock, lock):
        self._registry = registry
        self._memory = memory
        self._mediator = mediator
        self._audit = audit
        self._clock = clock
        self._lock = lock
        self._findings: list[DriftFinding] = []
        self._reports: dict[str, TerminationReport] = {}

    # -- transitions --------------------------------------------------

    def transition(self, agent_id: str, event: LifecycleEvent | str, actor: str,
                   reason: str | None = None) -> LifecycleState:
        event = LifecycleEvent(event)
        with self._lock:
            record = self._registry.get(agent_id)
            if event is LifecycleEvent.APPROVE:
                # approval carries owner/baseline payload; only approve_agent
                # may take this table row
                raise InvalidTransition(record.state.value, event.value)
            if event is LifecycleEvent.DECOMMISSION:
                raise InvalidTransition(record.state.value, event.value)
            target = TRANSITIONS.get((record.state, event))
            if target is None:
                raise InvalidTransition(record.state.value, event.value)
            if event in (LifecycleEvent.ACTIVATE, LifecycleEvent.REACTIVATE):
                if record.accountable_owner is None or record.expiration is None:
                    raise MissingOwner(f"agent {agent_id} cannot enter Active without "
                                       "an accountable owner and expiration")
                if event is LifecycleEvent.REACTIVATE and record.expiration <= self._clock.now():
                    raise ExpirationInPast(f"agent {agent_id} expiration has passed")
            return self._apply(record, event, target, actor, reason)

    def _apply(self, record, event: LifecycleEvent, target: LifecycleState,
               actor: str, reason: str | None) -> LifecycleState:
        previous = record.state
        self._registry.set_state(record.agent_id, target)
        self._audit.append("transition", actor, {
            "agent_id": record.agent_id,
            "from": previous.value,
            "to": target.value,
            "event": event.value,
            "reason": reason,
        })
        return target

    def sweep_expired(self, now: int | None = None) -> list[str]:
        """Suspend every Active agent whose expiration has passed."""
        with self._lock:
            if now is None:
                now = self._clock.now()
            swept = []
            for record in self._registry.agents():
                if record.state is LifecycleState.ACTIVE and record.expiration is not None \
                        and record.expiration <= now:
                    self._apply(record, LifecycleEvent.SUSPEND, LifecycleState.SUSPENDED,
                                "system", "expired")
                    swept.append(record.agent_id)
            return swept

    # -- decommission ---------------------------------------------------

    def decommission(self, agent_id: str, reason: str, actor: str) -> TerminationReport:
        """Terminal teardown: revoke credentials, freeze memory, write the
        termination report — atomically, with rollback on any failure."""
        with self._lock:
            record = self._registry.get(agent_id)
            if record.state not in (LifecycleState.ACTIVE, LifecycleState.SUSPENDED):
                raise InvalidState(
                    f"agent {agent_id} is {record.state.value}, not Active/Suspended")
            now = self._clock.now()
            undo_state = record.state
            undo_credentials = self._registry.snapshot_credentials(agent_id)
            undo_entries = self._memory.snapshot_frozen_flags(agent_id)
            undo_pending = self._mediator.snapshot_pending(agent_id)
            try:
                self._registry.set_state(agent_id, LifecycleState.DECOMMISSIONED)
                revoked = self._registry.revoke_active_credentials_unlogged(agent_id, now)
                frozen = self._memory.freeze_agent_entries_unlogged(agent_id)
                cancelled = self._mediator.cancel_pending_unlogged(
                    agent_id, f"agent decommissioned: {reason}", actor, now)
                history = self._mediator.decision_history(agent_id)
                report = TerminationReport(
                    agent_id=agent_id,
                    reason=reason,
                    initiated_by=actor,
                    revoked_credentials=len(revoked),
                    frozen_entries=len(frozen),
                    final_decision_log_digest=canonical.digest(history),
                    completed_at=now,
                )
                entries: list[tuple[str, str, dict[str, Any]]] = [
                    ("transition", actor, {
                        "agent_id": agent_id,
                        "from": undo_state.value,
                        "to": LifecycleState.DECOMMISSIONED.value,
                        "event": LifecycleEvent.DECOMMISSION.value,
                        "reason": reason,
                    }),
                ]
                for credential in revoked:
                    entries.append(("credential_revoked", actor, {
                        "agent_id": agent_id,
                        "credential_id": credential.credential_id,
                        "reason": reason,
                        "revoked_at": now,
                    }))
                if frozen:
                    entries.append(("memory_freeze", actor, {
                        "agent_id": agent_id,
                        "entry_ids": [e.entry_id for e in frozen],
                        "count": len(frozen),
                    }))
                termination_payload = report.payload()
                if cancelled:
                    termination_payload["cancelled_pending"] = cancelled
                entries.append(("termination", actor, termination_payload))
                self._audit.append_batch(entries, timestamp=now)
            except Exception:
                self._registry.set_state(agent_id, undo_state)
                self._registry.restore_credentials(agent_id, undo_credentials)
                self._memory.restore_frozen_flags(agent_id, undo_entries)
                self._mediator.restore_pending(agent_id, undo_pending)
                raise
            self._reports[agent_id] = report
            return report

    def termination_report(self, agent_id: str) -> TerminationReport | None:
        with self._lock:
            return self._reports.get(agent_id)

    # -- kill switch ------------------------------------------------------

    def kill_switch(self, agent_id: str, trigger_id: str, reason: str,
                    actor: str) -> KillReport:
        """Contain an Active agent now: suspend, revoke every credential,
        deny its pending requests — one atomic batch of evidence."""
        with self._lock:
            record = self._registry.get(agent_id)
            if record.state is not LifecycleState.ACTIVE:
                raise InvalidState(f"agent {agent_id} is {record.state.value}, not Active")
            now = self._clock.now()
            undo_credentials = self._registry.snapshot_credentials(agent_id)
            undo_pending = self._mediator.snapshot_pending(agent_id)
            try:
                self._registry.set_state(agent_id, LifecycleState.SUSPENDED)
                revoked = self._registry.revoke_active_credentials_unlogged(agent_id, now)
                cancelled = self._mediator.cancel_pending_unlogged(
                    agent_id, f"kill switch fired: {reason}", actor, now)
                report = KillReport(
                    agent_id=agent_id,
                    trigger_id=trigger_id,
                    reason=reason,
                    revoked_credentials=len(revoked),
                    cancelled_pending=len(cancelled),
                    fired_at=now,
                )
                kill_payload = report.payload()
                if cancelled:
                    kill_payload["cancelled_pending_records"] = cancelled
                entries: list[tuple[str, str, dict[str, Any]]] = [
                    ("kill_switch", actor, kill_payload),
                    ("transition", actor, {
                        "agent_id": agent_id,
                        "from": LifecycleState.ACTIVE.value,
                        "to": LifecycleState.SUSPENDED.value,
                        "event": LifecycleEvent.SUSPEND.value,
                        "reason": f"kill_switch:{trigger_id}",
                    }),
                ]
                for credential in revoked:
                    entries.append(("credential_revoked", actor, {
                        "agent_id": agent_id,
                        "credential_id": credential.credential_id,
                        "reason": f"kill_switch:{trigger_id}",
                        "revoked_at": now,
                    }))
                self._audit.append_batch(entries, timestamp=now)
            except Exception:
                self._registry.set_state(agent_id, LifecycleState.ACTIVE)
                self._registry.restore_credentials(agent_id, undo_credentials)
                self._mediator.restore_pending(agent_id, undo_pending)
                raise
            return report

    # -- drift ----------------------------------------------------------

    def detect_drift(self, agent_id: str, observed: Mapping[str, Any],
                     actor: str = "system") -> DriftFinding | None:
        """Compare an observed (policy/model/prompt/config) tuple against the
        approved baseline; a finding lists exactly the differing dimensions."""
        with self._lock:
            record = self._registry.get(agent_id)
            if record.baseline is None:
                raise NoBaseline(f"agent {agent_id} has no approved baseline")
            baseline = record.baseline
            expected = {
                "policy_version": baseline.policy_version,
                "model_id": baseline.model_id,
                "prompt_hash": baseline.prompt_hash,
                "config_hash": baseline.config_hash,
            }
            differing = frozenset(
                dim for dim in BASELINE_DIMENSIONS if observed.get(dim) != expected[dim])
            if not differing:
                return None
            finding = DriftFinding(
                agent_id=agent_id,
                detected_at=self._clock.now(),
                dimensions=differing,
                observed={dim: observed.get(dim) for dim in BASELINE_DIMENSIONS},
                baseline_policy_version=baseline.policy_version,
            )
            self._findings.append(finding)
            self._audit.append("drift", actor, finding.payload())
            return finding

    def findings(self, agent_id: str | None = None) -> list[DriftFinding]:
        with self._lock:
            if agent_id is None:
                return list(self._findings)
            return [f for f in self._findings if f.agent_id == agent_id]


def reachable_states() -> frozenset[LifecycleState]:
    """BFS over the transition table from Requested."""
    seen = {LifecycleState.REQUESTED}
    frontier = [LifecycleState.REQUESTED]
    while frontier:
        state = frontier.pop()
        for (source, _event), target in TRANSITIONS.items():
            if source is state and target not in seen:
                seen.add(target)
                frontier.append(target)
    return frozenset(seen)


__all__ = [
    "LifecycleState",
    "LifecycleEvent",
    "TRANSITIONS",
    "BASELINE_DIMENSIONS",
    "DriftFinding",
    "TerminationReport",
    "LifecycleManager",
    "reachable_states",
]
