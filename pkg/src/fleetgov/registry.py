"""Agent identity registry: the single system of record for the fleet.

Holds every agent's ownership, capability scope, approved baseline,
lifecycle state and expiration, plus the revocable machine credentials
bound to each agent. Capability scoping is least-privilege: an agent may
only hold tools that its declared capabilities grant in the capability
catalog, and a credential may only claim scopes its agent holds.

Redundancy (sprawl) is surfaced two ways: exact (persona, domain_class)
duplicates are rejected at registration unless explicitly overridden,
and ``find_overlapping`` scores capability overlap between agents by
Jaccard similarity over scope_of_practice ∪ allowed_tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable

from .errors import (
    AgentNotActive,
    DuplicatePersonaInDomain,
    ExpirationInPast,
    LeastPrivilegeViolation,
    MissingOwner,
    InvalidState,
    ParseError,
    ScopeEscalation,
    TtlBeyondExpiration,
    UnknownAgent,
)
from .lifecycle import LifecycleEvent, LifecycleState

if TYPE_CHECKING:
    from .audit import AuditLog
    from .ids import IdSource


class DomainClass(str, Enum):
    PATIENT_SAFETY = "patient_safety"
    PRIVACY = "privacy"
    CLINICAL_OUTCOME = "clinical_outcome"
    ADMINISTRATIVE = "administrative"


@dataclass(frozen=True)
class ApprovedBaseline:
    """The configuration identity an agent was approved to run as."""

    policy_version: int
    model_id: str
    prompt_hash: bytes
    config_hash: bytes
    approved_at: int

    def validate(self, now: int) -> None:
        if not self.model_id:
            raise ValueError("baseline model_id must be non-empty")
        for name, value in (("prompt_hash", self.prompt_hash), ("config_hash", self.config_hash)):
            if len(value) != 32:
                raise ValueError(f"baseline {name} must be 32 bytes")
        if self.approved_at > now:
            raise ValueError("baseline approved_at is in the future")

    def payload(self) -> dict[str, Any]:
        return {
            "policy_version": self.policy_version,
            "model_id": self.model_id,
            "prompt_hash": self.prompt_hash,
            "config_hash": self.config_hash,
            "approved_at": self.approved_at,
        }


@dataclass
class AgentRecord:
    agent_id: str
    persona: str
    domain_class: DomainClass
    scope_of_practice: frozenset[str]
    allowed_tools: frozenset[str]
    data_scopes: frozenset[str]
    registered_at: int
    state: LifecycleState = LifecycleState.REQUESTED
    accountable_owner: str | None = None
    owner_active: bool = True
    liability_owner: str | None = None
    baseline: ApprovedBaseline | None = None
    expiration: int | None = None

    def overlap_key(self) -> frozenset[str]:
        return self.scope_of_practice | self.allowed_tools

    def scopes(self) -> frozenset[str]:
        """Everything a credential may claim: tools plus data categories."""
        return self.allowed_tools | self.data_scopes


@dataclass
class NhiCredential:
    credential_id: str
    agent_id: str
    issued_at: int
    expires_at: int
    scope_claims: frozenset[str]
    status: str = "active"           # active | revoked
    revoked_at: int | None = None


@dataclass(frozen=True)
class CredentialCheck:
    valid: bool
    reason: str | None = None       # unknown | revoked | expired | agent_not_active


@dataclass(frozen=True)
class AgentDraft:
    persona: str
    domain_class: DomainClass
    scope_of_practice: frozenset[str]
    allowed_tools: frozenset[str]
    data_scopes: frozenset[str] = frozenset()


class CapabilityCatalog:
    """Maps capability tags to the tool ids they permit.

    File format (UTF-8, one record per line)::

        # comment
        capability_tag: tool_id tool_id ...

    Parse failures name the line and field.
    """

    def __init__(self, capabilities: dict[str, frozenset[str]]):
        self._capabilities = dict(capabilities)

    @classmethod
    def parse(cls, text: str) -> "CapabilityCatalog":
        capabilities: dict[str, frozenset[str]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ParseError("expected 'capability: tool ...'", line=lineno,
                                 field="capability")
            name, _, tools = line.partition(":")
            name = name.strip()
            if not name:
                raise ParseError("empty capability tag", line=lineno, field="capability")
            if name in capabilities:
                raise ParseError(f"capability {name!r} defined twice", line=lineno,
                                 field="capability")
            tool_ids = tools.split()
            if not tool_ids:
                raise ParseError(f"capability {name!r} lists no tools", line=lineno,
                                 field="tools")
            capabilities[name] = frozenset(tool_ids)
        return cls(capabilities)

    @classmethod
    def load(cls, path: str | Path) -> "CapabilityCatalog":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def __contains__(self, capability: str) -> bool:
        return capability in self._capabilities

    def tools_for(self, capabilities: Iterable[str]) -> frozenset[str]:
        granted: set[str] = set()
        for capability in capabilities:
            granted |= self._capabilities.get(capability, frozenset())
        return frozenset(granted)

    def capabilities(self) -> dict[str, frozenset[str]]:
        return dict(self._capabilities)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


# Fixed column order of the registry snapshot export.
EXPORT_FIELDS = (
    "agent_id", "persona", "domain_class", "state", "accountable_owner",
    "owner_active", "liability_owner", "scope_of_practice", "allowed_tools",
    "data_scopes", "expiration", "registered_at",
)


class AgentRegistry:
    def __init__(self, catalog: CapabilityCatalog, audit: "AuditLog", clock,
                 ids: "IdSource", lock):
        self._catalog = catalog
        self._audit = audit
        self._clock = clock
        self._ids = ids
        self._lock = lock
        self._agents: dict[str, AgentRecord] = {}
        self._credentials: dict[str, NhiCredential] = {}

    # -- registration and approval ------------------------------------

    def register_agent(self, draft: AgentDraft, operator: str,
                       override_duplicate: bool = False) -> AgentRecord:
        with self._lock:
            if not draft.persona:
                raise ParseError("persona must be non-empty", field="persona")
            if not draft.scope_of_practice:
                raise ParseError("scope_of_practice must be non-empty",
                                 field="scope_of_practice")
            permitted = self._catalog.tools_for(draft.scope_of_practice)
            excess = draft.allowed_tools - permitted
            if excess:
                raise LeastPrivilegeViolation(
                    f"tools {sorted(excess)} are not granted by capabilities "
                    f"{sorted(draft.scope_of_practice)} in the capability catalog")
            if not override_duplicate:
                for other in self._agents.values():
                    if other.persona == draft.persona \
                            and other.domain_class is draft.domain_class \
                            and other.state is LifecycleState.ACTIVE:
                        raise DuplicatePersonaInDomain(
                            f"persona {draft.persona!r} already Active in domain "
                            f"{draft.domain_class.value} as {other.agent_id} "
                            "(pass override_duplicate to register anyway)")
            now = self._clock.now()
            record = AgentRecord(
                agent_id=self._ids.new("agt"),
                persona=draft.persona,
                domain_class=draft.domain_class,
                scope_of_practice=draft.scope_of_practice,
                allowed_tools=draft.allowed_tools,
                data_scopes=draft.data_scopes,
                registered_at=now,
            )
            self._agents[record.agent_id] = record
            self._audit.append("registration", operator, {
                "agent_id": record.agent_id,
                "persona": record.persona,
                "domain_class": record.domain_class.value,
                "scope_of_practice": sorted(record.scope_of_practice),
                "allowed_tools": sorted(record.allowed_tools),
                "data_scopes": sorted(record.data_scopes),
                "registered_at": now,
                "override_duplicate": override_duplicate,
            })
            return record

    def approve_agent(self, agent_id: str, accountable_owner: str,
                      liability_owner: str | None, expiration: int,
                      baseline: ApprovedBaseline, operator: str) -> AgentRecord:
        with self._lock:
            record = self.get(agent_id)
            if record.state is not LifecycleState.REQUESTED:
                raise InvalidState(
                    f"agent {agent_id} is {record.state.value}, not Requested")
            if not accountable_owner:
                raise MissingOwner("approval requires an accountable owner")
            now = self._clock.now()
            if expiration <= now:
                raise ExpirationInPast(f"expiration {expiration} is not after now {now}")
            baseline.validate(now)
            record.accountable_owner = accountable_owner
            record.owner_active = True
            record.liability_owner = liability_owner
            record.expiration = expiration
            record.baseline = baseline
            record.state = LifecycleState.APPROVED
            self._audit.append("approval", operator, {
                "agent_id": agent_id,
                "action": "approved",
                "from": LifecycleState.REQUESTED.value,
                "to": LifecycleState.APPROVED.value,
                "event": LifecycleEvent.APPROVE.value,
                "accountable_owner": accountable_owner,
                "liability_owner": liability_owner,
                "expiration": expiration,
                "baseline": baseline.payload(),
            })
            return record

    def update_baseline(self, agent_id: str, baseline: ApprovedBaseline,
                        operator: str) -> AgentRecord:
        """Re-approve an agent's configuration identity (resolves drift)."""
        with self._lock:
            record = self.get(agent_id)
            if record.state is LifecycleState.DECOMMISSIONED:
                raise InvalidState(f"agent {agent_id} is Decommissioned")
            baseline.validate(self._clock.now())
            record.baseline = baseline
            self._audit.append("approval", operator, {
                "agent_id": agent_id,
                "action": "baseline_updated",
                "baseline": baseline.payload(),
            })
            return record

    def mark_owner_departed(self, agent_id: str, operator: str) -> AgentRecord:
        """Flag that the named owner no longer actively holds the agent
        (offboarding). The registry row keeps the name; the orphan KPI
        picks the agent up until a new approval restores ownership."""
        with self._lock:
            record = self.get(agent_id)
            if record.accountable_owner is None:
                raise MissingOwner(f"agent {agent_id} has no owner to depart")
            record.owner_active = False
            self._audit.append("owner_departed", operator, {
                "agent_id": agent_id,
                "accountable_owner": record.accountable_owner,
            })
            return record

    # -- redundancy -----------------------------------------------------

    def find_overlapping(self, agent_id: str, threshold: float) -> list[tuple[str, float]]:
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {threshold}")
        with self._lock:
            subject = self.get(agent_id)
            key = subject.overlap_key()
            scored = []
            for other in self._agents.values():
                if other.agent_id == agent_id \
                        or other.state is LifecycleState.DECOMMISSIONED:
                    continue
                score = jaccard(key, other.overlap_key())
                if score >= threshold:
                    scored.append((other.agent_id, score))
            scored.sort(key=lambda pair: (-pair[1], pair[0]))
            return scored

    # -- credentials ------------------------------------------------------

    def issue_credential(self, agent_id: str, requested_scope: Iterable[str],
                         ttl: int, operator: str) -> NhiCredential:
        with self._lock:
            record = self.get(agent_id)
            if record.state is not LifecycleState.ACTIVE:
                raise AgentNotActive(f"agent {agent_id} is {record.state.value}")
            claims = frozenset(requested_scope)
            escalation = claims - record.scopes()
            if escalation:
                raise ScopeEscalation(
                    f"claims {sorted(escalation)} exceed agent scopes")
            now = self._clock.now()
            expires_at = now + ttl
            if record.expiration is None or expires_at > record.expiration:
                raise TtlBeyondExpiration(
                    f"credential would expire at {expires_at}, after agent "
                    f"expiration {record.expiration}")
            credential = NhiCredential(
                credential_id=self._ids.new("crd"),
                agent_id=agent_id,
                issued_at=now,
                expires_at=expires_at,
                scope_claims=claims,
            )
            self._credentials[credential.credential_id] = credential
            self._audit.append("credential_issued", operator, {
                "agent_id": agent_id,
                "credential_id": credential.credential_id,
                "issued_at": now,
                "expires_at": expires_at,
                "scope_claims": sorted(claims),
            })
            return credential

    def revoke_credentials(self, agent_id: str, reason: str, operator: str) -> int:
        """Revoke every active credential of the agent; idempotent."""
        with self._lock:
            self.get(agent_id)
            now = self._clock.now()
            revoked = self.revoke_active_credentials_unlogged(agent_id, now)
            for credential in revoked:
                self._audit.append("credential_revoked", operator, {
                    "agent_id": agent_id,
                    "credential_id": credential.credential_id,
                    "reason": reason,
                    "revoked_at": now,
                })
            return len(revoked)

    def validate_credential(self, credential_id: str, now: int) -> CredentialCheck:
        with self._lock:
            credential = self._credentials.get(credential_id)
            if credential is None:
                return CredentialCheck(False, "unknown")
            if credential.status != "active":
                return CredentialCheck(False, "revoked")
            if now >= credential.expires_at:
                return CredentialCheck(False, "expired")
            agent = self._agents.get(credential.agent_id)
            if agent is None or agent.state is not LifecycleState.ACTIVE:
                return CredentialCheck(False, "agent_not_active")
            return CredentialCheck(True)

    # -- accessors ---------------------------------------------------------

    def get(self, agent_id: str) -> AgentRecord:
        record = self._agents.get(agent_id)
        if record is None:
            raise UnknownAgent(f"no agent {agent_id!r}")
        return record

    def agents(self) -> list[AgentRecord]:
        with self._lock:
            return list(self._agents.values())

    def credential(self, credential_id: str) -> NhiCredential | None:
        with self._lock:
            return self._credentials.get(credential_id)

    def credentials_for(self, agent_id: str) -> list[NhiCredential]:
        with self._lock:
            return [c for c in self._credentials.values() if c.agent_id == agent_id]

    def export_agents(self) -> str:
        """Registry snapshot: one agent per line, fixed field order."""
        with self._lock:
            lines = []
            for agent_id in sorted(self._agents):
                record = self._agents[agent_id]
                values = {
                    "agent_id": record.agent_id,
                    "persona": record.persona,
                    "domain_class": record.domain_class.value,
                    "state": record.state.value,
                    "accountable_owner": record.accountable_owner or "-",
                    "owner_active": "true" if record.owner_active else "false",
                    "liability_owner": record.liability_owner or "-",
                    "scope_of_practice": ",".join(sorted(record.scope_of_practice)) or "-",
                    "allowed_tools": ",".join(sorted(record.allowed_tools)) or "-",
                    "data_scopes": ",".join(sorted(record.data_scopes)) or "-",
                    "expiration": str(record.expiration) if record.expiration is not None else "-",
                    "registered_at": str(record.registered_at),
                }
                lines.append("\t".join(values[f] for f in EXPORT_FIELDS))
            return "\n".join(lines) + ("\n" if lines else "")

    # -- internals used by lifecycle (caller holds the lock, logs itself) --

    def set_state(self, agent_id: str, state: LifecycleState) -> None:
        self.get(agent_id).state = state

    def snapshot_credentials(self, agent_id: str) -> list[tuple[str, str, int | None]]:
        return [(c.credential_id, c.status, c.revoked_at)
                for c in self._credentials.values() if c.agent_id == agent_id]

    def restore_credentials(self, agent_id: str,
                            snapshot: list[tuple[str, str, int | None]]) -> None:
        for credential_id, status, revoked_at in snapshot:
            credential = self._credentials[credential_id]
            credential.status = status
            credential.revoked_at = revoked_at

    def revoke_active_credentials_unlogged(self, agent_id: str,
                                           now: int) -> list[NhiCredential]:
        revoked = []
        for credential in self._credentials.values():
            if credential.agent_id == agent_id and credential.status == "active":
                credential.status = "revoked"
                credential.revoked_at = now
                revoked.append(credential)
        revoked.sort(key=lambda c: c.credential_id)
        return revoked
