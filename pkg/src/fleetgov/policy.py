"""Versioned policy-as-code: rule documents, precedence evaluation, triggers.

Evaluation is a pure function with a two-level ordering:

1. collect every rule whose subject, action and resource matchers all
   match the request;
2. keep only the highest-precedence domain class present
   (patient_safety > privacy > clinical_outcome > administrative);
3. within that class, deny beats require_human beats allow;
4. zero matches means deny (``default_deny``).

The verdict never depends on the order rules appear in the document:
trace lines and tie-breaks are canonicalized by rule_id.

Rule ``conditions`` are predicate tags checked against the evaluation
context. An allow or deny rule only matches when all its conditions are
present. A require_human rule always matches; when its conditions are
all present the oversight requirement is discharged and the rule
contributes allow instead.

Policy document format (UTF-8)::

    # comment
    rule <rule_id>
      class <patient_safety|privacy|clinical_outcome|administrative>
      subject <pattern>
      action <pattern>
      resource <pattern or phi:<pattern>>
      effect <allow|deny|require_human>
      conditions <tag> <tag> ...        # optional

Patterns are exact strings or a single trailing-wildcard form
(``prefix*``; bare ``*`` matches anything). The subject pattern is
matched against the agent id, the persona, and each capability tag.
The resource pattern matches a request when any of the request's
(category, phi) resources matches; the ``phi:`` form additionally
requires the phi flag; a bare ``*`` also matches requests that touch
no resources.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Sequence

from . import canonical
from .errors import (
    DuplicateRuleId,
    ParseError,
    UnknownDomainClass,
    UnknownPolicyVersion,
)
from .registry import DomainClass

if TYPE_CHECKING:
    from .audit import AuditLog
    from .ids import IdSource
    from .registry import AgentRecord

# Conflict precedence, highest first. Safety outranks privacy by local
# decision; reorder here (and only here) to change the lattice.
DOMAIN_PRECEDENCE: tuple[DomainClass, ...] = (
    DomainClass.PATIENT_SAFETY,
    DomainClass.PRIVACY,
    DomainClass.CLINICAL_OUTCOME,
    DomainClass.ADMINISTRATIVE,
)

EFFECTS = ("allow", "deny", "require_human")

# Within-class combinator, strongest first (fail closed).
_EFFECT_STRENGTH = {"deny": 0, "require_human": 1, "allow": 2}


def domain_rank(domain: DomainClass) -> int:
    return DOMAIN_PRECEDENCE.index(domain)


@dataclass(frozen=True)
class Matcher:
    """Exact match, or a single trailing wildcard: ``prefix*``."""

    pattern: str

    def __post_init__(self):
        if not self.pattern:
            raise ValueError("matcher pattern must be non-empty")
        star = self.pattern.find("*")
        if star != -1 and star != len(self.pattern) - 1:
            raise ValueError(
                f"pattern {self.pattern!r}: wildcard only allowed at the end")

    def matches(self, value: str) -> bool:
        if self.pattern.endswith("*"):
            return value.startswith(self.pattern[:-1])
        return value == self.pattern


@dataclass(frozen=True)
class PolicyRule:
    rule_id: str
    domain_class: DomainClass
    subject: Matcher
    action: Matcher
    resource: Matcher
    effect: str
    conditions: frozenset[str] = frozenset()
    resource_phi_only: bool = False

    def payload(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "class": self.domain_class.value,
            "subject": self.subject.pattern,
            "action": self.action.pattern,
            "resource": ("phi:" if self.resource_phi_only else "") + self.resource.pattern,
            "effect": self.effect,
            "conditions": sorted(self.conditions),
        }


@dataclass(frozen=True)
class PolicyVersion:
    version: int
    rules: tuple[PolicyRule, ...]
    loaded_at: int
    source_digest: bytes


@dataclass(frozen=True)
class DecisionRecord:
    decision_id: str
    request_id: str
    agent_id: str
    credential_id: str | None
    timestamp: int
    effect: str
    matched_rules: tuple[tuple[str, str, str], ...]   # (rule_id, class, effect)
    winning_rule: str
    policy_version: int
    precedence_trace: tuple[str, ...]
    amends: str | None = None

    def payload(self) -> dict[str, Any]:
        return {
            "decision_id": self.decision_id,
            "request_id": self.request_id,
            "agent_id": self.agent_id,
            "credential_id": self.credential_id,
            "timestamp": self.timestamp,
            "effect": self.effect,
            "matched_rules": [list(m) for m in self.matched_rules],
            "winning_rule": self.winning_rule,
            "policy_version": self.policy_version,
            "precedence_trace": list(self.precedence_trace),
            "amends": self.amends,
        }


@dataclass(frozen=True)
class KillSwitchTrigger:
    trigger_id: str
    kind: str                      # incident_threshold | drift_detected |
    #                                repeated_denials | owner_revoked | manual
    parameters: dict[str, int] = field(default_factory=dict)
    armed: bool = True

    KINDS = ("incident_threshold", "drift_detected", "repeated_denials",
             "owner_revoked", "manual")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown trigger kind {self.kind!r}")
        for name, value in self.parameters.items():
            if value <= 0:
                raise ValueError(f"trigger parameter {name!r} must be positive")


@dataclass(frozen=True)
class TelemetryEvent:
    """One observation in a trigger-evaluation window."""

    kind: str                      # decision | incident | drift | owner_departed |
    #                                manual_request
    timestamp: int
    agent_id: str
    effect: str | None = None      # decision events
    severity: int | None = None    # incident events


# -- document parsing ----------------------------------------------------

_RULE_FIELDS = ("class", "subject", "action", "resource", "effect", "conditions")


def parse_policy_document(text: str) -> list[PolicyRule]:
    rules: list[PolicyRule] = []
    seen: set[str] = set()
    current_id: str | None = None
    current_line = 0
    fields: dict[str, Any] = {}

    def finish() -> None:
        nonlocal current_id, fields
        if current_id is None:
            return
        for required in ("class", "subject", "action", "resource", "effect"):
            if required not in fields:
                raise ParseError(f"rule {current_id!r} missing field",
                                 line=current_line, field=required)
        resource = fields["resource"]
        phi_only = resource.startswith("phi:")
        if phi_only:
            resource = resource[4:]
        try:
            rule = PolicyRule(
                rule_id=current_id,
                domain_class=fields["class"],
                subject=Matcher(fields["subject"]),
                action=Matcher(fields["action"]),
                resource=Matcher(resource),
                effect=fields["effect"],
                conditions=frozenset(fields.get("conditions", ())),
                resource_phi_only=phi_only,
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=current_line, field="resource") from exc
        rules.append(rule)
        current_id = None
        fields = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        keyword = parts[0]
        if keyword == "rule":
            finish()
            if len(parts) != 2:
                raise ParseError("expected 'rule <rule_id>'", line=lineno, field="rule")
            current_id = parts[1]
            current_line = lineno
            if current_id in seen:
                raise DuplicateRuleId(f"rule id {current_id!r} already defined",
                                      line=lineno, field="rule")
            seen.add(current_id)
            continue
        if current_id is None:
            raise ParseError(f"field {keyword!r} outside a rule block", line=lineno,
                             field=keyword)
        if keyword not in _RULE_FIELDS:
            raise ParseError(f"unknown field {keyword!r}", line=lineno, field=keyword)
        if keyword in fields:
            raise ParseError(f"field {keyword!r} repeated", line=lineno, field=keyword)
        value = line[len(keyword):].strip()
        if keyword == "class":
            try:
                fields["class"] = DomainClass(value)
            except ValueError as exc:
                raise UnknownDomainClass(f"unknown domain class {value!r}",
                                         line=lineno, field="class") from exc
        elif keyword == "effect":
            if value not in EFFECTS:
                raise ParseError(f"unknown effect {value!r}", line=lineno, field="effect")
            fields["effect"] = value
        elif keyword == "conditions":
            fields["conditions"] = tuple(value.split())
        else:
            if not value:
                raise ParseError("empty pattern", line=lineno, field=keyword)
            if keyword != "resource" and value.startswith("phi:"):
                raise ParseError("phi: prefix only valid on resource", line=lineno,
                                 field=keyword)
            pattern = value[4:] if keyword == "resource" and value.startswith("phi:") else value
            try:
                Matcher(pattern)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, field=keyword) from exc
            fields[keyword] = value
    finish()
    return rules


# -- matching -------------------------------------------------------------


def subject_matches(rule: PolicyRule, agent: "AgentRecord") -> bool:
    if rule.subject.matches(agent.agent_id) or rule.subject.matches(agent.persona):
        return True
    return any(rule.subject.matches(tag) for tag in agent.scope_of_practice)


def resource_matches(rule: PolicyRule,
                     resources: Iterable[tuple[str, bool]]) -> bool:
    resources = list(resources)
    if rule.resource.pattern == "*" and not rule.resource_phi_only:
        return True
    for category, phi in resources:
        if rule.resource_phi_only and not phi:
            continue
        if rule.resource.matches(category):
            return True
    return False


def rule_matches(rule: PolicyRule, agent: "AgentRecord", tool: str,
                 resources: Iterable[tuple[str, bool]],
                 condition_tags: frozenset[str]) -> bool:
    if not subject_matches(rule, agent):
        return False
    if not rule.action.matches(tool):
        return False
    if not resource_matches(rule, resources):
        return False
    if rule.effect in ("allow", "deny") and not rule.conditions <= condition_tags:
        return False
    return True


def effective_effect(rule: PolicyRule, condition_tags: frozenset[str]) -> str:
    if rule.effect == "require_human" and rule.conditions \
            and rule.conditions <= condition_tags:
        return "allow"
    return rule.effect


# -- engine ------------------------------------------------------------


class PolicyEngine:
    def __init__(self, audit: "AuditLog", clock, ids: "IdSource", lock):
        self._audit = audit
        self._clock = clock
        self._ids = ids
        self._lock = lock
        self._versions: dict[int, PolicyVersion] = {}
        self._decisions: dict[str, DecisionRecord] = {}
        self._decision_order: list[str] = []
        self.triggers: list[KillSwitchTrigger] = []

    # -- versions -----------------------------------------------------

    def load_policy(self, document: str, operator: str) -> PolicyVersion:
        with self._lock:
            rules = parse_policy_document(document)
            version = PolicyVersion(
                version=max(self._versions, default=0) + 1,
                rules=tuple(rules),
                loaded_at=self._clock.now(),
                source_digest=canonical.digest_bytes(document.encode("utf-8")),
            )
            self._versions[version.version] = version
            # the document text travels in the event so state can be fully
            # rebuilt from the log (policy is governance code, never PHI)
            self._audit.append("policy_loaded", operator, {
                "policy_version": version.version,
                "source_digest": version.source_digest,
                "rule_count": len(rules),
                "rule_ids": [r.rule_id for r in rules],
                "document": document,
            })
            return version

    def latest_version(self) -> PolicyVersion | None:
        with self._lock:
            if not self._versions:
                return None
            return self._versions[max(self._versions)]

    def version(self, number: int) -> PolicyVersion:
        with self._lock:
            found = self._versions.get(number)
            if found is None:
                raise UnknownPolicyVersion(f"no policy version {number}")
            return found

    # -- evaluation -----------------------------------------------------

    def evaluate(self, request, agent: "AgentRecord", version: PolicyVersion,
                 condition_tags: frozenset[str] = frozenset()) -> DecisionRecord:
        """Deterministic verdict; the decision is persisted and audit-logged
        with the full precedence trace before it is returned."""
        with self._lock:
            if version.version not in self._versions \
                    or self._versions[version.version] is not version:
                raise UnknownPolicyVersion(f"policy version {version.version} not loaded")
            effect, winning, matched, trace = evaluate_rules(
                version.rules, agent, request.tool, request.resources, condition_tags)
            record = DecisionRecord(
                decision_id=self._ids.new("dec"),
                request_id=request.request_id,
                agent_id=agent.agent_id,
                credential_id=request.credential_id,
                timestamp=self._clock.now(),
                effect=effect,
                matched_rules=matched,
                winning_rule=winning,
                policy_version=version.version,
                precedence_trace=trace,
            )
            self._store(record)
            self._audit.append("decision", agent.agent_id, {
                "request": request.payload(),
                "decision": record.payload(),
            })
            return record

    def record_synthetic_denial(self, request, reason: str) -> DecisionRecord:
        """Decision evidence for requests that never reach rule evaluation
        (invalid credential, malformed request). Fail closed, still recorded."""
        with self._lock:
            latest = max(self._versions, default=0)
            record = DecisionRecord(
                decision_id=self._ids.new("dec"),
                request_id=request.request_id,
                agent_id=request.agent_id,
                credential_id=request.credential_id,
                timestamp=self._clock.now(),
                effect="deny",
                matched_rules=(),
                winning_rule=reason,
                policy_version=latest,
                precedence_trace=(f"denied before evaluation: {reason}",),
            )
            self._store(record)
            self._audit.append("decision", request.agent_id or "unknown", {
                "request": request.payload(),
                "decision": record.payload(),
            })
            return record

    def record_amendment(self, original: DecisionRecord, effect: str, actor: str,
                         reason: str) -> DecisionRecord:
        """Append-only follow-up to an immutable decision (human verdicts,
        kill-switch cancellations)."""
        with self._lock:
            record = DecisionRecord(
                decision_id=self._ids.new("dec"),
                request_id=original.request_id,
                agent_id=original.agent_id,
                credential_id=original.credential_id,
                timestamp=self._clock.now(),
                effect=effect,
                matched_rules=(),
                winning_rule=reason,
                policy_version=original.policy_version,
                precedence_trace=(f"amendment by {actor}: {reason}",),
                amends=original.decision_id,
            )
            self._store(record)
            return record

    def _store(self, record: DecisionRecord) -> None:
        self._decisions[record.decision_id] = record
        self._decision_order.append(record.decision_id)

    def decision(self, decision_id: str) -> DecisionRecord | None:
        with self._lock:
            return self._decisions.get(decision_id)

    def decisions(self) -> list[DecisionRecord]:
        with self._lock:
            return [self._decisions[d] for d in self._decision_order]

    def decision_history(self, agent_id: str) -> list[dict[str, Any]]:
        with self._lock:
            return [self._decisions[d].payload() for d in self._decision_order
                    if self._decisions[d].agent_id == agent_id]

    def export_decisions(self) -> str:
        """Newline-delimited decision records for compliance review."""
        import json
        with self._lock:
            lines = []
            for decision_id in self._decision_order:
                payload = self._decisions[decision_id].payload()
                lines.append(json.dumps(payload, sort_keys=True, separators=(",", ":")))
            return "\n".join(lines) + ("\n" if lines else "")

    # -- triggers ------------------------------------------------------

    def check_triggers(self, agent_id: str,
                       window: Sequence[TelemetryEvent]) -> list[KillSwitchTrigger]:
        """Pure function of the supplied window: every armed trigger whose
        threshold the agent's events meet."""
        events = [e for e in window if e.agent_id == agent_id]
        fired = []
        for trigger in self.triggers:
            if trigger.armed and _trigger_fires(trigger, events):
                fired.append(trigger)
        return fired


def _trigger_fires(trigger: KillSwitchTrigger, events: Sequence[TelemetryEvent]) -> bool:
    params = trigger.parameters
    if trigger.kind == "repeated_denials":
        count = params.get("count", 3)
        window = params.get("window_seconds")
        denials = sorted(e.timestamp for e in events
                         if e.kind == "decision" and e.effect == "deny")
        if window is None:
            return len(denials) >= count
        for i in range(len(denials) - count + 1):
            if denials[i + count - 1] - denials[i] <= window:
                return True
        return False
    if trigger.kind == "incident_threshold":
        min_severity = params.get("min_severity", 1)
        count = params.get("count", 1)
        hits = [e for e in events
                if e.kind == "incident" and (e.severity or 0) >= min_severity]
        return len(hits) >= count
    if trigger.kind == "drift_detected":
        return any(e.kind == "drift" for e in events)
    if trigger.kind == "owner_revoked":
        return any(e.kind == "owner_departed" for e in events)
    if trigger.kind == "manual":
        return any(e.kind == "manual_request" for e in events)
    return False


def evaluate_rules(rules: Sequence[PolicyRule], agent: "AgentRecord", tool: str,
                   resources: Iterable[tuple[str, bool]],
                   condition_tags: frozenset[str] = frozenset(),
                   ) -> tuple[str, str, tuple[tuple[str, str, str], ...], tuple[str, ...]]:
    """Core precedence algorithm; returns (effect, winning_rule, matched, trace)."""
    resources = list(resources)
    matched = [r for r in rules
               if rule_matches(r, agent, tool, resources, condition_tags)]
    matched.sort(key=lambda r: r.rule_id)
    matched_summary = tuple(
        (r.rule_id, r.domain_class.value, r.effect) for r in matched)
    trace: list[str] = []
    if not matched:
        trace.append("no rule matched; default deny")
        return "deny", "default_deny", matched_summary, tuple(trace)
    trace.append("matched: " + ", ".join(r.rule_id for r in matched))
    best_rank = min(domain_rank(r.domain_class) for r in matched)
    best_class = DOMAIN_PRECEDENCE[best_rank]
    survivors = []
    for rule in matched:
        if domain_rank(rule.domain_class) == best_rank:
            survivors.append(rule)
        else:
            trace.append(f"eliminated {rule.rule_id} ({rule.domain_class.value}): "
                         f"outranked by {best_class.value}")
    contributions = [(rule, effective_effect(rule, condition_tags)) for rule in survivors]
    for rule, contributed in contributions:
        if contributed != rule.effect:
            trace.append(f"{rule.rule_id}: conditions satisfied, "
                         f"require_human discharged to allow")
    final = min(contributions, key=lambda pair: _EFFECT_STRENGTH[pair[1]])[1]
    winners = [rule.rule_id for rule, contributed in contributions if contributed == final]
    winning = min(winners)
    trace.append(f"{best_class.value} rules combined with "
                 f"deny > require_human > allow: {final} via {winning}")
    return final, winning, matched_summary, tuple(trace)
