"""Mandatory gateway for tool calls and inter-agent messages.

There is no bypass: every request that enters ``mediate`` leaves exactly
one decision record and one audit event behind, whatever happens to it —
credential failures and malformed requests are graded outcomes (denied),
never silent drops. Effects:

    allow          -> executed (via the pluggable executor callback)
    deny           -> denied
    require_human  -> pending_human (operator queue)

Conflicts between agents resolve by domain-class precedence; equal
classes escalate to the human queue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Iterable

from .errors import AlreadyResolved, InvalidState, UnknownTarget
from .lifecycle import LifecycleState
from .policy import domain_rank
from .registry import DomainClass

if TYPE_CHECKING:
    from .audit import AuditLog
    from .ids import IdSource
    from .policy import PolicyEngine
    from .registry import AgentRegistry


@dataclass(frozen=True)
class ToolCallRequest:
    request_id: str
    agent_id: str
    credential_id: str
    tool: str
    resources: tuple[tuple[str, bool], ...]   # (data category, phi flag)
    workflow_id: str | None
    intent: str
    submitted_at: int
    channel: str = "local"         # identity of the submitting runtime/gateway

    def payload(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "agent_id": self.agent_id,
            "credential_id": self.credential_id,
            "tool": self.tool,
            "resources": [[category, phi] for category, phi in self.resources],
            "workflow_id": self.workflow_id,
            "intent": self.intent,
            "submitted_at": self.submitted_at,
            "channel": self.channel,
        }


@dataclass
class MediationOutcome:
    request_id: str
    decision_id: str
    disposition: str               # executed | denied | pending_human
    completed_at: int | None

    def payload(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "decision_id": self.decision_id,
            "disposition": self.disposition,
            "completed_at": self.completed_at,
        }


@dataclass(frozen=True)
class Claim:
    domain_class: DomainClass
    objective: str


@dataclass
class ConflictCase:
    case_id: str
    agents: tuple[str, str]
    contested: str
    claims: dict[str, Claim]
    status: str = "open"           # open | resolved | escalated
    resolution: str | None = None

    def payload(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "agents": list(self.agents),
            "contested": self.contested,
            "claims": {agent: {"domain_class": claim.domain_class.value,
                               "objective": claim.objective}
                       for agent, claim in self.claims.items()},
            "status": self.status,
            "resolution": self.resolution,
        }


@dataclass(frozen=True)
class DeliveryReceipt:
    message_id: str
    delivered: bool
    reason: str | None = None


def _noop_executor(request: ToolCallRequest) -> None:
    """Default tool executor: governance is the artifact, tooling is a stub."""


class Mediator:
    def __init__(self, registry: "AgentRegistry", engine: "PolicyEngine",
                 audit: "AuditLog", clock, ids: "IdSource", lock,
                 executor: Callable[[ToolCallRequest], None] | None = None):
        self._registry = registry
        self._engine = engine
        self._audit = audit
        self._clock = clock
        self._ids = ids
        self._lock = lock
        self._executor = executor or _noop_executor
        self._outcomes: dict[str, MediationOutcome] = {}
        self._requests: dict[str, ToolCallRequest] = {}
        self._pending_requests: dict[str, str] = {}    # request_id -> agent_id
        self._cases: dict[str, ConflictCase] = {}

    # -- tool calls ------------------------------------------------------

    def mediate(self, agent_id: str, credential_id: str, tool: str,
                resources: Iterable[tuple[str, bool]] = (),
                workflow_id: str | None = None, intent: str = "",
                request_id: str | None = None, channel: str = "local") -> MediationOutcome:
        """Run one tool call through the full pipeline. Never raises for
        request defects; the failure grade is the outcome."""
        with self._lock:
            now = self._clock.now()
            request = ToolCallRequest(
                request_id=request_id or self._ids.new("req"),
                agent_id=agent_id or "",
                credential_id=credential_id or "",
                tool=tool or "",
                resources=tuple((str(c), bool(p)) for c, p in resources),
                workflow_id=workflow_id,
                intent=intent,
                submitted_at=now,
                channel=channel,
            )
            problem = self._malformed(request)
            if problem:
                return self._deny(request, f"malformed:{problem}")
            check = self._registry.validate_credential(request.credential_id, now)
            if not check.valid:
                return self._deny(request, f"credential_invalid:{check.reason}")
            credential = self._registry.credential(request.credential_id)
            if credential.agent_id != request.agent_id:
                return self._deny(request, "credential_invalid:wrong_agent")
            version = self._engine.latest_version()
            if version is None:
                return self._deny(request, "no_policy_loaded")
            agent = self._registry.get(request.agent_id)
            decision = self._engine.evaluate(request, agent, version)
            if decision.effect == "allow":
                self._executor(request)
                outcome = MediationOutcome(request.request_id, decision.decision_id,
                                           "executed", now)
            elif decision.effect == "require_human":
                outcome = MediationOutcome(request.request_id, decision.decision_id,
                                           "pending_human", None)
                self._pending_requests[request.request_id] = request.agent_id
            else:
                outcome = MediationOutcome(request.request_id, decision.decision_id,
                                           "denied", now)
            self._requests[request.request_id] = request
            self._outcomes[request.request_id] = outcome
            return outcome

    def _malformed(self, request: ToolCallRequest) -> str | None:
        if not request.agent_id:
            return "missing_agent_id"
        if not request.credential_id:
            return "missing_credential_id"
        if not request.tool:
            return "missing_tool"
        if request.request_id in self._outcomes:
            return "duplicate_request_id"
        return None

    def _deny(self, request: ToolCallRequest, reason: str) -> MediationOutcome:
        decision = self._engine.record_synthetic_denial(request, reason)
        outcome = MediationOutcome(request.request_id, decision.decision_id,
                                   "denied", self._clock.now())
        # a duplicate request id is denied and recorded, but never clobbers
        # the original request's stored outcome
        if request.request_id not in self._outcomes:
            self._requests[request.request_id] = request
            self._outcomes[request.request_id] = outcome
        return outcome

    def outcome(self, request_id: str) -> MediationOutcome | None:
        with self._lock:
            return self._outcomes.get(request_id)

    def request(self, request_id: str) -> ToolCallRequest | None:
        with self._lock:
            return self._requests.get(request_id)

    def outcomes(self) -> list[MediationOutcome]:
        with self._lock:
            return list(self._outcomes.values())

    # -- messages ------------------------------------------------------

    def route_message(self, from_agent: str, to_agent: str, payload_digest: bytes,
                      declared_intent: str, sender_credential_id: str,
                      channel: str = "local") -> DeliveryReceipt:
        """Deliver only between Active agents with a valid sender credential;
        anything else is a refused receipt, logged either way."""
        with self._lock:
            sender = self._registry.get(from_agent)
            recipient = self._registry.get(to_agent)
            now = self._clock.now()
            reason = None
            if sender.state is not LifecycleState.ACTIVE:
                reason = "sender_not_active"
            elif recipient.state is not LifecycleState.ACTIVE:
                reason = "recipient_not_active"
            else:
                check = self._registry.validate_credential(sender_credential_id, now)
                if not check.valid:
                    reason = f"sender_credential_invalid:{check.reason}"
                else:
                    credential = self._registry.credential(sender_credential_id)
                    if credential.agent_id != from_agent:
                        reason = "sender_credential_invalid:wrong_agent"
            message_id = self._ids.new("msg")
            receipt = DeliveryReceipt(message_id, reason is None, reason)
            self._audit.append("message", from_agent, {
                "message_id": message_id,
                "agent_id": from_agent,
                "to_agent": to_agent,
                "payload_digest": payload_digest,
                "intent": declared_intent,
                "delivered": receipt.delivered,
                "refusal_reason": reason,
                "channel": channel,
            })
            return receipt

    # -- conflicts ------------------------------------------------------

    def open_conflict(self, agent_a: str, agent_b: str, contested: str,
                      claims: dict[str, Claim], operator: str) -> ConflictCase:
        with self._lock:
            if agent_a == agent_b:
                raise ValueError("a conflict needs two distinct agents")
            for agent_id in (agent_a, agent_b):
                self._registry.get(agent_id)
                if agent_id not in claims:
                    raise ValueError(f"missing claim for {agent_id}")
            case = ConflictCase(
                case_id=self._ids.new("cas"),
                agents=(agent_a, agent_b),
                contested=contested,
                claims=dict(claims),
            )
            self._cases[case.case_id] = case
            self._audit.append("conflict", operator, {
                "phase": "opened", **case.payload(),
            })
            return case

    def resolve_conflict(self, case_id: str, operator: str) -> ConflictCase:
        """The strictly higher domain class wins; ties escalate to a human."""
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise UnknownTarget(f"no conflict case {case_id!r}")
            if case.status != "open":
                raise InvalidState(f"case {case_id} is {case.status}, not open")
            a, b = case.agents
            rank_a = domain_rank(case.claims[a].domain_class)
            rank_b = domain_rank(case.claims[b].domain_class)
            if rank_a == rank_b:
                case.status = "escalated"
                reasoning = (f"equal precedence ({case.claims[a].domain_class.value}); "
                             "escalated to human")
            else:
                winner = a if rank_a < rank_b else b
                case.status = "resolved"
                case.resolution = winner
                loser = b if winner == a else a
                reasoning = (f"{case.claims[winner].domain_class.value} outranks "
                             f"{case.claims[loser].domain_class.value}; {winner} prevails")
            self._audit.append("conflict", operator, {
                "phase": case.status, "reasoning": reasoning, **case.payload(),
            })
            return case

    def case(self, case_id: str) -> ConflictCase | None:
        with self._lock:
            return self._cases.get(case_id)

    # -- human oversight --------------------------------------------------

    def pending(self) -> dict[str, list[dict[str, Any]]]:
        """The operator work queue: requests awaiting a verdict and
        escalated conflicts."""
        with self._lock:
            requests = []
            for request_id in self._pending_requests:
                request = self._requests[request_id]
                outcome = self._outcomes[request_id]
                requests.append({"request": request.payload(),
                                 "outcome": outcome.payload()})
            cases = [case.payload() for case in self._cases.values()
                     if case.status == "escalated"]
            return {"requests": requests, "cases": cases}

    def submit_human_verdict(self, target_id: str, operator_id: str, verdict: str,
                             note: str = "") -> dict[str, Any]:
        """Operator decision on a pending request or an escalated conflict.

        For requests the original decision stays immutable; an amendment
        record carries the verdict. For escalated conflicts, ``allow``
        upholds the first-listed agent's claim and ``deny`` the second's.
        """
        if verdict not in ("allow", "deny"):
            raise ValueError(f"verdict must be allow or deny, got {verdict!r}")
        with self._lock:
            now = self._clock.now()
            if target_id in self._requests:
                outcome = self._outcomes[target_id]
                if target_id not in self._pending_requests:
                    raise AlreadyResolved(
                        f"request {target_id} is {outcome.disposition}, not pending")
                request = self._requests[target_id]
                original = self._engine.decision(outcome.decision_id)
                amendment = self._engine.record_amendment(
                    original, verdict, operator_id, f"human_verdict:{verdict}")
                del self._pending_requests[target_id]
                if verdict == "allow":
                    self._executor(request)
                    outcome.disposition = "executed"
                else:
                    outcome.disposition = "denied"
                outcome.decision_id = amendment.decision_id
                outcome.completed_at = now
                self._audit.append("human_verdict", operator_id, {
                    "target": "request",
                    "request_id": target_id,
                    "agent_id": request.agent_id,
                    "verdict": verdict,
                    "note": note,
                    "amendment": amendment.payload(),
                })
                return {"kind": "request", "outcome": outcome.payload()}
            if target_id in self._cases:
                case = self._cases[target_id]
                if case.status == "resolved":
                    raise AlreadyResolved(f"case {target_id} already resolved")
                if case.status != "escalated":
                    raise InvalidState(f"case {target_id} is {case.status}, not escalated")
                case.resolution = case.agents[0] if verdict == "allow" else case.agents[1]
                case.status = "resolved"
                self._audit.append("human_verdict", operator_id, {
                    "target": "conflict",
                    "case_id": target_id,
                    "verdict": verdict,
                    "note": note,
                    "resolution": case.resolution,
                })
                return {"kind": "conflict", "case": case.payload()}
            raise UnknownTarget(f"no pending request or case {target_id!r}")

    # -- delegation -------------------------------------------------------

    def decision_history(self, agent_id: str) -> list[dict[str, Any]]:
        return self._engine.decision_history(agent_id)

    # -- internals used by lifecycle (caller holds the lock, logs itself) --

    def snapshot_pending(self, agent_id: str) -> dict[str, Any]:
        pending = {rid: aid for rid, aid in self._pending_requests.items()
                   if aid == agent_id}
        outcomes = {rid: (self._outcomes[rid].disposition,
                          self._outcomes[rid].decision_id,
                          self._outcomes[rid].completed_at)
                    for rid in pending}
        return {"pending": pending, "outcomes": outcomes}

    def restore_pending(self, agent_id: str, snapshot: dict[str, Any]) -> None:
        for request_id, aid in snapshot["pending"].items():
            self._pending_requests[request_id] = aid
        for request_id, (disposition, decision_id, completed_at) in \
                snapshot["outcomes"].items():
            outcome = self._outcomes[request_id]
            outcome.disposition = disposition
            outcome.decision_id = decision_id
            outcome.completed_at = completed_at

    def cancel_pending_unlogged(self, agent_id: str, reason: str, actor: str,
                                now: int) -> list[dict[str, Any]]:
        """Deny every pending request of a contained agent; returns the
        amendment payloads for inclusion in the caller's audit batch."""
        cancelled = []
        for request_id in sorted(rid for rid, aid in self._pending_requests.items()
                                 if aid == agent_id):
            outcome = self._outcomes[request_id]
            original = self._engine.decision(outcome.decision_id)
            amendment = self._engine.record_amendment(original, "deny", actor, reason)
            del self._pending_requests[request_id]
            outcome.disposition = "denied"
            outcome.decision_id = amendment.decision_id
            outcome.completed_at = now
            cancelled.append(amendment.payload())
        return cancelled
