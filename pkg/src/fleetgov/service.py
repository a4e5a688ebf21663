"""Deployable control-plane service: config, wire API, persistence wiring.

The wire protocol is JSON over HTTP. Every mutating endpoint requires an
``X-Operator`` header naming an identity from the configured operator
list; the identity lands in the audit evidence as the actor (or, for
agent-plane calls, the submitting channel). Errors use one envelope::

    {"code": "<stable error code>", "message": "...", "detail": ...}

Persistence is the append-only audit log itself: on startup an existing
log is replayed to rebuild registry, credential, memory, policy,
decision and pending-queue state (memory payload bytes are digest-only
tombstone material and are not recoverable from the log by design).

Endpoint catalog: docs/api.md.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlparse

from .audit import AuditEvent
from .clock import LogicalClock, WallClock
from .errors import (
    ConfigError,
    GovernanceError,
    OperatorRequired,
    UnknownOperator,
)
from .lifecycle import DriftFinding, LifecycleState, TerminationReport
from .mediation import Claim, MediationOutcome, ToolCallRequest
from .memory import MemoryEntry, RetentionClasses
from .metrics import FeatureFlags
from .plane import ControlPlane
from .policy import DecisionRecord, KillSwitchTrigger, PolicyVersion, parse_policy_document
from .registry import (
    AgentRecord,
    ApprovedBaseline,
    AgentDraft,
    CapabilityCatalog,
    DomainClass,
    NhiCredential,
)

_STATUS_BY_CODE = {
    "unknown_agent": 404,
    "unknown_target": 404,
    "unknown_policy_version": 404,
    "not_found": 404,
    "invalid_state": 409,
    "invalid_transition": 409,
    "already_resolved": 409,
    "duplicate_persona_in_domain": 409,
    "agent_not_active": 409,
    "expiration_in_past": 409,
    "missing_owner": 409,
    "no_baseline": 409,
    "ttl_beyond_expiration": 409,
    "least_privilege_violation": 403,
    "scope_escalation": 403,
    "scope_violation": 403,
    "unknown_operator": 403,
    "operator_required": 401,
    "ttl_exceeds_retention_class": 400,
    "parse_error": 400,
    "duplicate_rule_id": 400,
    "unknown_domain_class": 400,
    "invalid_config": 400,
    "window_outside_log": 400,
    "range_out_of_bounds": 400,
    "bad_request": 400,
    "storage_failure": 500,
    "corrupt_log": 500,
    "config_error": 500,
    "governance_error": 500,
}


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str
    listen_port: int
    data_dir: Path
    capability_catalog: Path
    retention_classes: Path
    operators: tuple[str, ...]
    policy_document: Path | None = None
    triggers: tuple[KillSwitchTrigger, ...] = ()
    kpi_window_seconds: int = 86400
    sweep_interval_seconds: int = 0     # 0 disables the background sweeper
    clock_mode: str = "wall"            # wall | logical
    clock_start: int = 0
    id_seed: int | None = None
    ui_dir: Path | None = None

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, base=path.parent)

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base: Path | None = None) -> "ServiceConfig":
        def resolve(name: str, required: bool = True) -> Path | None:
            value = raw.get(name)
            if value is None:
                if required:
                    raise ConfigError(f"config field {name!r} is required")
                return None
            path = Path(value)
            if base is not None and not path.is_absolute():
                path = base / path
            return path

        listen = raw.get("listen", "127.0.0.1:0")
        host, _, port_text = listen.partition(":")
        try:
            port = int(port_text or "0")
        except ValueError as exc:
            raise ConfigError(f"config field 'listen': bad port {port_text!r}") from exc
        operators = tuple(raw.get("operators", ()))
        if not operators:
            raise ConfigError("config field 'operators' must list at least one identity")
        triggers = []
        for index, spec in enumerate(raw.get("triggers", ())):
            try:
                triggers.append(KillSwitchTrigger(
                    trigger_id=spec["trigger_id"],
                    kind=spec["kind"],
                    parameters={k: int(v) for k, v in spec.get("parameters", {}).items()},
                    armed=bool(spec.get("armed", True)),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"config trigger #{index}: {exc}") from exc
        clock_mode = raw.get("clock", {}).get("mode", "wall")
        if clock_mode not in ("wall", "logical"):
            raise ConfigError(f"config clock.mode must be wall or logical, "
                              f"got {clock_mode!r}")
        config = cls(
            listen_host=host or "127.0.0.1",
            listen_port=port,
            data_dir=resolve("data_dir"),
            capability_catalog=resolve("capability_catalog"),
            retention_classes=resolve("retention_classes"),
            operators=operators,
            policy_document=resolve("policy_document", required=False),
            triggers=tuple(triggers),
            kpi_window_seconds=int(raw.get("kpi_window_seconds", 86400)),
            sweep_interval_seconds=int(raw.get("sweep_interval_seconds", 0)),
            clock_mode=clock_mode,
            clock_start=int(raw.get("clock", {}).get("start", 0)),
            id_seed=raw.get("id_seed"),
            ui_dir=resolve("ui_dir", required=False),
        )
        config.validate()
        return config

    def validate(self) -> None:
        for name in ("capability_catalog", "retention_classes"):
            path = getattr(self, name)
            if not path.exists():
                raise ConfigError(f"config field {name!r}: {path} does not exist")
        CapabilityCatalog.load(self.capability_catalog)
        RetentionClasses.load(self.retention_classes)
        if self.policy_document is not None:
            if not self.policy_document.exists():
                raise ConfigError(
                    f"config field 'policy_document': {self.policy_document} "
                    "does not exist")
            parse_policy_document(self.policy_document.read_text(encoding="utf-8"))
        if self.kpi_window_seconds <= 0:
            raise ConfigError("config field 'kpi_window_seconds' must be positive")
        if self.sweep_interval_seconds < 0:
            raise ConfigError("config field 'sweep_interval_seconds' must be >= 0")
        if self.sweep_interval_seconds and self.clock_mode == "logical":
            raise ConfigError("background sweeps need the wall clock; a logical "
                              "clock only moves via /clock/advance")


def build_plane(config: ServiceConfig) -> ControlPlane:
    """Construct the plane for a service: storage wired, state rehydrated,
    startup policy loaded when configured and not already in the log."""
    config.data_dir.mkdir(parents=True, exist_ok=True)
    audit_path = config.data_dir / "audit.log"
    had_log = audit_path.exists() and audit_path.stat().st_size > 0
    clock = WallClock() if config.clock_mode == "wall" else LogicalClock(config.clock_start)
    plane = ControlPlane(
        catalog=CapabilityCatalog.load(config.capability_catalog),
        retention=RetentionClasses.load(config.retention_classes),
        clock=clock,
        id_seed=config.id_seed,
        audit_path=audit_path,
        triggers=config.triggers,
    )
    if had_log:
        if isinstance(clock, LogicalClock):
            last_ts = plane.audit.events()[-1].timestamp
            if last_ts > clock.now():
                clock.advance(last_ts - clock.now())
        rehydrate(plane)
    if config.policy_document is not None and plane.policy.latest_version() is None:
        plane.policy.load_policy(
            config.policy_document.read_text(encoding="utf-8"), "system")
    return plane


def rehydrate(plane: ControlPlane) -> None:
    """Rebuild in-memory state from the plane's own audit log.

    Covers registry rows, credentials, memory metadata (payload bytes are
    not logged), policy versions (document text travels in the event),
    decision records, pending-human queues, conflicts, drift findings and
    termination reports.
    """
    with plane.lock:
        registry = plane.registry
        engine = plane.policy
        mediator = plane.mediator
        store = plane.memory
        lifecycle = plane.lifecycle
        for event in plane.audit.events():
            payload = event.payload
            kind = event.kind
            if kind == "registration":
                record = AgentRecord(
                    agent_id=payload["agent_id"],
                    persona=payload["persona"],
                    domain_class=DomainClass(payload["domain_class"]),
                    scope_of_practice=frozenset(payload["scope_of_practice"]),
                    allowed_tools=frozenset(payload["allowed_tools"]),
                    data_scopes=frozenset(payload["data_scopes"]),
                    registered_at=payload["registered_at"],
                )
                registry._agents[record.agent_id] = record
            elif kind == "approval":
                record = registry._agents[payload["agent_id"]]
                baseline = payload["baseline"]
                record.baseline = ApprovedBaseline(
                    policy_version=baseline["policy_version"],
                    model_id=baseline["model_id"],
                    prompt_hash=baseline["prompt_hash"],
                    config_hash=baseline["config_hash"],
                    approved_at=baseline["approved_at"],
                )
                if payload.get("action") == "approved":
                    record.accountable_owner = payload["accountable_owner"]
                    record.owner_active = True
                    record.liability_owner = payload["liability_owner"]
                    record.expiration = payload["expiration"]
                    record.state = LifecycleState.APPROVED
            elif kind == "owner_departed":
                registry._agents[payload["agent_id"]].owner_active = False
            elif kind == "transition":
                registry._agents[payload["agent_id"]].state = \
                    LifecycleState(payload["to"])
            elif kind == "credential_issued":
                credential = NhiCredential(
                    credential_id=payload["credential_id"],
                    agent_id=payload["agent_id"],
                    issued_at=payload["issued_at"],
                    expires_at=payload["expires_at"],
                    scope_claims=frozenset(payload["scope_claims"]),
                )
                registry._credentials[credential.credential_id] = credential
            elif kind == "credential_revoked":
                credential = registry._credentials[payload["credential_id"]]
                credential.status = "revoked"
                credential.revoked_at = payload["revoked_at"]
            elif kind == "policy_loaded":
                version = PolicyVersion(
                    version=payload["policy_version"],
                    rules=tuple(parse_policy_document(payload["document"])),
                    loaded_at=event.timestamp,
                    source_digest=payload["source_digest"],
                )
                engine._versions[version.version] = version
            elif kind == "decision":
                record = _decision_from_payload(payload["decision"])
                engine._store(record)
                request = _request_from_payload(payload["request"])
                mediator._requests[request.request_id] = request
                disposition = {"allow": "executed", "deny": "denied",
                               "require_human": "pending_human"}[record.effect]
                completed = None if disposition == "pending_human" else event.timestamp
                mediator._outcomes[request.request_id] = MediationOutcome(
                    request.request_id, record.decision_id, disposition, completed)
                if disposition == "pending_human":
                    mediator._pending_requests[request.request_id] = request.agent_id
            elif kind in ("human_verdict", "kill_switch", "termination"):
                amendments = []
                if kind == "human_verdict" and payload.get("target") == "request":
                    amendments = [payload["amendment"]]
                elif kind == "kill_switch":
                    amendments = payload.get("cancelled_pending_records", [])
                elif kind == "termination":
                    amendments = payload.get("cancelled_pending", [])
                for raw_amendment in amendments:
                    amendment = _decision_from_payload(raw_amendment)
                    engine._store(amendment)
                    outcome = mediator._outcomes.get(amendment.request_id)
                    if outcome is not None:
                        outcome.disposition = ("executed" if amendment.effect == "allow"
                                               else "denied")
                        outcome.decision_id = amendment.decision_id
                        outcome.completed_at = event.timestamp
                        mediator._pending_requests.pop(amendment.request_id, None)
                if kind == "human_verdict" and payload.get("target") == "conflict":
                    case = mediator._cases.get(payload["case_id"])
                    if case is not None:
                        case.status = "resolved"
                        case.resolution = payload["resolution"]
                if kind == "termination":
                    lifecycle._reports[payload["agent_id"]] = TerminationReport(
                        agent_id=payload["agent_id"],
                        reason=payload["reason"],
                        initiated_by=payload["initiated_by"],
                        revoked_credentials=payload["revoked_credentials"],
                        frozen_entries=payload["frozen_entries"],
                        final_decision_log_digest=payload["final_decision_log_digest"],
                        completed_at=payload["completed_at"],
                    )
            elif kind == "conflict":
                from .mediation import ConflictCase
                case = mediator._cases.get(payload["case_id"])
                if case is None:
                    case = ConflictCase(
                        case_id=payload["case_id"],
                        agents=tuple(payload["agents"]),
                        contested=payload["contested"],
                        claims={aid: Claim(DomainClass(claim["domain_class"]),
                                           claim["objective"])
                                for aid, claim in payload["claims"].items()},
                    )
                    mediator._cases[case.case_id] = case
                case.status = payload["status"]
                case.resolution = payload["resolution"]
            elif kind == "memory_write":
                entry = MemoryEntry(
                    entry_id=payload["entry_id"],
                    agent_id=payload["agent_id"],
                    shard_key=payload["shard_key"],
                    data_category=payload["data_category"],
                    phi=payload["phi"],
                    payload_digest=payload["payload_digest"],
                    payload=b"",        # bytes are never logged
                    created_at=payload["created_at"],
                    ttl=payload["ttl"],
                )
                store._entries[entry.entry_id] = entry
            elif kind == "memory_purge":
                for purged in payload["purged"]:
                    entry = store._entries[purged["entry_id"]]
                    entry.purged = True
                    entry.payload = b""
            elif kind == "memory_freeze":
                for entry_id in payload["entry_ids"]:
                    store._entries[entry_id].frozen = True
            elif kind == "drift":
                lifecycle._findings.append(DriftFinding(
                    agent_id=payload["agent_id"],
                    detected_at=payload["detected_at"],
                    dimensions=frozenset(payload["dimensions"]),
                    observed=dict(payload["observed"]),
                    baseline_policy_version=payload["baseline_policy_version"],
                ))


def _decision_from_payload(payload: dict[str, Any]) -> DecisionRecord:
    return DecisionRecord(
        decision_id=payload["decision_id"],
        request_id=payload["request_id"],
        agent_id=payload["agent_id"],
        credential_id=payload["credential_id"],
        timestamp=payload["timestamp"],
        effect=payload["effect"],
        matched_rules=tuple(tuple(m) for m in payload["matched_rules"]),
        winning_rule=payload["winning_rule"],
        policy_version=payload["policy_version"],
        precedence_trace=tuple(payload["precedence_trace"]),
        amends=payload.get("amends"),
    )


def _request_from_payload(payload: dict[str, Any]) -> ToolCallRequest:
    return ToolCallRequest(
        request_id=payload["request_id"],
        agent_id=payload["agent_id"],
        credential_id=payload["credential_id"],
        tool=payload["tool"],
        resources=tuple((c, bool(p)) for c, p in payload["resources"]),
        workflow_id=payload["workflow_id"],
        intent=payload["intent"],
        submitted_at=payload["submitted_at"],
        channel=payload.get("channel", "local"),
    )


# -- JSON views -----------------------------------------------------------


def jsonable(value: Any) -> Any:
    """Recursively convert payload values (bytes -> hex) for JSON bodies."""
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def agent_view(record: AgentRecord) -> dict[str, Any]:
    return {
        "agent_id": record.agent_id,
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
        "baseline": jsonable(record.baseline.payload()) if record.baseline else None,
    }


def credential_view(credential: NhiCredential) -> dict[str, Any]:
    return {
        "credential_id": credential.credential_id,
        "agent_id": credential.agent_id,
        "issued_at": credential.issued_at,
        "expires_at": credential.expires_at,
        "status": credential.status,
        "revoked_at": credential.revoked_at,
        "scope_claims": sorted(credential.scope_claims),
    }


def event_view(event: AuditEvent) -> dict[str, Any]:
    return {
        "seq": event.seq,
        "timestamp": event.timestamp,
        "kind": event.kind,
        "actor": event.actor,
        "payload_digest": event.payload_digest.hex(),
        "prev_hash": event.prev_hash.hex(),
        "hash": event.hash.hex(),
        "payload": jsonable(event.payload),
    }


def _baseline_from_body(body: dict[str, Any]) -> ApprovedBaseline:
    try:
        return ApprovedBaseline(
            policy_version=int(body["policy_version"]),
            model_id=body["model_id"],
            prompt_hash=bytes.fromhex(body["prompt_hash"]),
            config_hash=bytes.fromhex(body["config_hash"]),
            approved_at=int(body["approved_at"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise _bad_request(f"baseline: {exc}")


def _bad_request(message: str) -> GovernanceError:
    error = GovernanceError(message)
    error.code = "bad_request"
    return error


class GovernanceService:
    """HTTP facade over a ControlPlane."""

    def __init__(self, config: ServiceConfig, plane: ControlPlane | None = None):
        self.config = config
        self.plane = plane if plane is not None else build_plane(config)
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._sweeper: threading.Thread | None = None
        self._stopping = threading.Event()
        self._routes = _build_routes()

    # -- lifecycle ----------------------------------------------------

    def start(self) -> tuple[str, int]:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer(
            (self.config.listen_host, self.config.listen_port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="fleetgov-http", daemon=True)
        self._thread.start()
        if self.config.sweep_interval_seconds:
            self._sweeper = threading.Thread(target=self._sweep_loop,
                                             name="fleetgov-sweeper", daemon=True)
            self._sweeper.start()
        return self._server.server_address[0], self._server.server_address[1]

    def _sweep_loop(self) -> None:
        """Periodic retirement: suspend lapsed agents, purge expired memory."""
        while not self._stopping.wait(self.config.sweep_interval_seconds):
            self.plane.lifecycle.sweep_expired()
            self.plane.memory.expire_memories()

    def stop(self) -> None:
        self._stopping.set()
        if self._sweeper is not None:
            self._sweeper.join(timeout=5)
            self._sweeper = None
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self.plane.close()      # flushes the audit log file handle

    @property
    def port(self) -> int:
        return self._server.server_address[1] if self._server else 0

    # -- dispatch ----------------------------------------------------

    def dispatch(self, method: str, path: str, query: dict[str, list[str]],
                 body: dict[str, Any] | None, operator: str | None,
                 ) -> tuple[int, dict[str, Any] | bytes, str]:
        """Returns (status, body, content_type)."""
        for route_method, pattern, mutating, handler in self._routes:
            if method != route_method:
                continue
            match = pattern.fullmatch(path)
            if match is None:
                continue
            if mutating:
                if operator is None:
                    raise OperatorRequired("X-Operator header is required")
                if operator not in self.config.operators:
                    raise UnknownOperator(f"operator {operator!r} is not configured")
            result = handler(self, match, query, body or {}, operator)
            if isinstance(result, tuple):
                return result
            return 200, result, "application/json"
        raise _not_found(path)


def _not_found(path: str) -> GovernanceError:
    error = GovernanceError(f"no endpoint {path!r}")
    error.code = "not_found"
    return error


def _query_int(query: dict[str, list[str]], name: str,
               default: int | None = None) -> int | None:
    values = query.get(name)
    if not values:
        return default
    try:
        return int(values[0])
    except ValueError as exc:
        raise _bad_request(f"query parameter {name!r} must be an integer") from exc


def _query_str(query: dict[str, list[str]], name: str) -> str | None:
    values = query.get(name)
    return values[0] if values else None


# -- route handlers ---------------------------------------------------------
# Each handler: (service, match, query, body, operator) -> json dict or
# (status, bytes, content_type).


def _h_healthz(service, match, query, body, operator):
    plane = service.plane
    return {"status": "ok", "now": plane.clock.now(), "events": len(plane.audit)}


def _h_clock_advance(service, match, query, body, operator):
    if service.config.clock_mode != "logical":
        raise _bad_request("clock advance is only available in logical clock mode")
    seconds = body.get("seconds")
    if not isinstance(seconds, int) or seconds < 0:
        raise _bad_request("body field 'seconds' must be a non-negative integer")
    return {"now": service.plane.clock.advance(seconds)}


def _h_policy_load(service, match, query, body, operator):
    document = body.get("document")
    if not isinstance(document, str):
        raise _bad_request("body field 'document' must be a string")
    version = service.plane.policy.load_policy(document, operator)
    return {"policy_version": version.version,
            "source_digest": version.source_digest.hex(),
            "rule_count": len(version.rules),
            "audit_seq": service.plane.audit.last_seq}


def _h_policy_latest(service, match, query, body, operator):
    version = service.plane.policy.latest_version()
    if version is None:
        return {"policy_version": None}
    return {"policy_version": version.version,
            "source_digest": version.source_digest.hex(),
            "rules": [jsonable(r.payload()) for r in version.rules],
            "loaded_at": version.loaded_at}


def _h_register(service, match, query, body, operator):
    try:
        draft = AgentDraft(
            persona=body["persona"],
            domain_class=DomainClass(body["domain_class"]),
            scope_of_practice=frozenset(body["scope_of_practice"]),
            allowed_tools=frozenset(body.get("allowed_tools", ())),
            data_scopes=frozenset(body.get("data_scopes", ())),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise _bad_request(f"agent draft: {exc}")
    record = service.plane.registry.register_agent(
        draft, operator, override_duplicate=bool(body.get("override_duplicate")))
    return {"agent": agent_view(record), "audit_seq": service.plane.audit.last_seq}


def _h_agents(service, match, query, body, operator):
    records = sorted(service.plane.registry.agents(), key=lambda r: r.agent_id)
    return {"agents": [agent_view(r) for r in records]}


def _h_agent(service, match, query, body, operator):
    plane = service.plane
    record = plane.registry.get(match.group("agent_id"))
    return {
        "agent": agent_view(record),
        "credentials": [credential_view(c)
                        for c in plane.registry.credentials_for(record.agent_id)],
        "drift_findings": [jsonable(f.payload())
                           for f in plane.lifecycle.findings(record.agent_id)],
        "termination_report": jsonable(
            plane.lifecycle.termination_report(record.agent_id).payload())
        if plane.lifecycle.termination_report(record.agent_id) else None,
    }


def _h_approve(service, match, query, body, operator):
    record = service.plane.registry.approve_agent(
        match.group("agent_id"),
        body.get("accountable_owner"),
        body.get("liability_owner"),
        int(body.get("expiration", 0)),
        _baseline_from_body(body.get("baseline", {})),
        operator,
    )
    return {"agent": agent_view(record), "audit_seq": service.plane.audit.last_seq}


def _h_update_baseline(service, match, query, body, operator):
    record = service.plane.registry.update_baseline(
        match.group("agent_id"), _baseline_from_body(body.get("baseline", {})), operator)
    return {"agent": agent_view(record), "audit_seq": service.plane.audit.last_seq}


def _h_transition(service, match, query, body, operator):
    event = body.get("event")
    if not isinstance(event, str):
        raise _bad_request("body field 'event' must be a string")
    state = service.plane.lifecycle.transition(
        match.group("agent_id"), event, operator, reason=body.get("reason"))
    return {"state": state.value, "audit_seq": service.plane.audit.last_seq}


def _h_decommission(service, match, query, body, operator):
    report = service.plane.decommission(
        match.group("agent_id"), body.get("reason", ""), operator)
    return {"termination_report": jsonable(report.payload()),
            "audit_seq": service.plane.audit.last_seq}


def _h_kill(service, match, query, body, operator):
    report = service.plane.fire_kill_switch(
        match.group("agent_id"), body.get("trigger_id", "manual"),
        body.get("reason", ""), operator)
    return {"kill_report": jsonable(report.payload()),
            "audit_seq": service.plane.audit.last_seq}


def _h_owner_departed(service, match, query, body, operator):
    record = service.plane.registry.mark_owner_departed(match.group("agent_id"), operator)
    return {"agent": agent_view(record), "audit_seq": service.plane.audit.last_seq}


def _h_overlaps(service, match, query, body, operator):
    threshold = query.get("threshold", ["0.5"])[0]
    try:
        threshold = float(threshold)
    except ValueError as exc:
        raise _bad_request("query parameter 'threshold' must be a number") from exc
    try:
        overlaps = service.plane.registry.find_overlapping(
            match.group("agent_id"), threshold)
    except ValueError as exc:
        raise _bad_request(str(exc)) from exc
    return {"overlaps": [{"agent_id": aid, "score": score} for aid, score in overlaps]}


def _h_issue_credential(service, match, query, body, operator):
    credential = service.plane.registry.issue_credential(
        match.group("agent_id"), body.get("scope_claims", ()),
        int(body.get("ttl", 0)), operator)
    return {"credential": credential_view(credential),
            "audit_seq": service.plane.audit.last_seq}


def _h_revoke_credentials(service, match, query, body, operator):
    count = service.plane.registry.revoke_credentials(
        match.group("agent_id"), body.get("reason", ""), operator)
    return {"revoked": count, "audit_seq": service.plane.audit.last_seq}


def _h_validate_credential(service, match, query, body, operator):
    now = _query_int(query, "now", service.plane.clock.now())
    check = service.plane.registry.validate_credential(match.group("credential_id"), now)
    return {"valid": check.valid, "reason": check.reason}


def _h_drift_check(service, match, query, body, operator):
    observed = dict(body.get("observed", {}))
    for key in ("prompt_hash", "config_hash"):
        if isinstance(observed.get(key), str):
            try:
                observed[key] = bytes.fromhex(observed[key])
            except ValueError as exc:
                raise _bad_request(f"observed.{key} must be hex") from exc
    finding = service.plane.lifecycle.detect_drift(
        match.group("agent_id"), observed, operator)
    return {"finding": jsonable(finding.payload()) if finding else None,
            "audit_seq": service.plane.audit.last_seq}


def _h_check_triggers(service, match, query, body, operator):
    window = _query_int(query, "window_seconds")
    fired = service.plane.check_triggers(match.group("agent_id"), window)
    return {"fired": [t.trigger_id for t in fired]}


def _h_mediate(service, match, query, body, operator):
    outcome = service.plane.mediator.mediate(
        body.get("agent_id", ""),
        body.get("credential_id", ""),
        body.get("tool", ""),
        resources=[(c, bool(p)) for c, p in body.get("resources", ())],
        workflow_id=body.get("workflow_id"),
        intent=body.get("intent", ""),
        request_id=body.get("request_id"),
        channel=operator,
    )
    return {"outcome": outcome.payload(), "decision_id": outcome.decision_id,
            "audit_seq": service.plane.audit.last_seq}


def _h_message(service, match, query, body, operator):
    try:
        digest = bytes.fromhex(body.get("payload_digest", ""))
    except ValueError as exc:
        raise _bad_request("body field 'payload_digest' must be hex") from exc
    receipt = service.plane.mediator.route_message(
        body.get("from_agent", ""), body.get("to_agent", ""), digest,
        body.get("intent", ""), body.get("sender_credential_id", ""),
        channel=operator)
    return {"receipt": {"message_id": receipt.message_id,
                        "delivered": receipt.delivered,
                        "reason": receipt.reason},
            "audit_seq": service.plane.audit.last_seq}


def _h_open_conflict(service, match, query, body, operator):
    agents = body.get("agents", ())
    if len(agents) != 2:
        raise _bad_request("body field 'agents' must list exactly two agent ids")
    try:
        claims = {aid: Claim(DomainClass(claim["domain_class"]), claim["objective"])
                  for aid, claim in body.get("claims", {}).items()}
    except (KeyError, ValueError, TypeError) as exc:
        raise _bad_request(f"claims: {exc}")
    try:
        case = service.plane.mediator.open_conflict(
            agents[0], agents[1], body.get("contested", ""), claims, operator)
    except ValueError as exc:
        raise _bad_request(str(exc)) from exc
    return {"case": case.payload(), "audit_seq": service.plane.audit.last_seq}


def _h_resolve_conflict(service, match, query, body, operator):
    case = service.plane.mediator.resolve_conflict(match.group("case_id"), operator)
    return {"case": case.payload(), "audit_seq": service.plane.audit.last_seq}


def _h_get_conflict(service, match, query, body, operator):
    case = service.plane.mediator.case(match.group("case_id"))
    if case is None:
        raise _not_found(f"/conflicts/{match.group('case_id')}")
    return {"case": case.payload()}


def _h_pending(service, match, query, body, operator):
    return service.plane.mediator.pending()


def _h_verdict(service, match, query, body, operator):
    verdict = body.get("verdict")
    if verdict not in ("allow", "deny"):
        raise _bad_request("body field 'verdict' must be allow or deny")
    result = service.plane.mediator.submit_human_verdict(
        match.group("target_id"), operator, verdict, body.get("note", ""))
    return {"result": result, "audit_seq": service.plane.audit.last_seq}


def _h_memory_write(service, match, query, body, operator):
    try:
        payload = bytes.fromhex(body.get("payload", ""))
    except ValueError as exc:
        raise _bad_request("body field 'payload' must be hex") from exc
    entry_id = service.plane.write_memory(
        body.get("agent_id", ""), body.get("shard_key", ""),
        body.get("data_category", ""), bool(body.get("phi")), payload,
        int(body.get("ttl", 0)), workflow_id=body.get("workflow_id"))
    return {"entry_id": entry_id, "audit_seq": service.plane.audit.last_seq}


def _h_memory_read(service, match, query, body, operator):
    categories = _query_str(query, "categories")
    entries = service.plane.read_memory(
        _query_str(query, "agent_id") or "",
        _query_str(query, "shard_key") or "",
        categories.split(",") if categories else None,
        _query_int(query, "now"),
        workflow_id=_query_str(query, "workflow_id"))
    return {"entries": [{
        "entry_id": e.entry_id,
        "agent_id": e.agent_id,
        "shard_key": e.shard_key,
        "data_category": e.data_category,
        "phi": e.phi,
        "payload": e.payload.hex(),
        "payload_digest": e.payload_digest.hex(),
        "created_at": e.created_at,
        "ttl": e.ttl,
    } for e in entries], "count": len(entries)}


def _h_memory_expire(service, match, query, body, operator):
    now = body.get("now")
    purged = service.plane.memory.expire_memories(
        int(now) if now is not None else None)
    return {"purged": purged, "audit_seq": service.plane.audit.last_seq}


def _h_memory_freeze(service, match, query, body, operator):
    frozen = service.plane.freeze_memories(body.get("agent_id", ""))
    return {"frozen": frozen, "audit_seq": service.plane.audit.last_seq}


def _h_sweep(service, match, query, body, operator):
    now = body.get("now")
    swept = service.plane.lifecycle.sweep_expired(int(now) if now is not None else None)
    return {"suspended": swept, "audit_seq": service.plane.audit.last_seq}


def _h_incident(service, match, query, body, operator):
    try:
        service.plane.report_incident(
            body.get("agent_id", ""), body.get("category", ""),
            int(body.get("severity", 0)), operator,
            workflow_id=body.get("workflow_id"))
    except ValueError as exc:
        raise _bad_request(str(exc)) from exc
    return {"recorded": True, "audit_seq": service.plane.audit.last_seq}


def _h_ungoverned_call(service, match, query, body, operator):
    request_id = service.plane.record_ungoverned_call(
        body.get("agent_id", ""), body.get("tool", ""),
        resources=[(c, bool(p)) for c, p in body.get("resources", ())],
        workflow_id=body.get("workflow_id"), intent=body.get("intent", ""),
        channel=operator)
    return {"request_id": request_id, "audit_seq": service.plane.audit.last_seq}


def _h_ungoverned_read(service, match, query, body, operator):
    service.plane.record_ungoverned_read(
        body.get("agent_id", ""), body.get("shard_key", ""),
        body.get("categories", ()), bool(body.get("phi_returned")),
        int(body.get("count", 0)), workflow_id=body.get("workflow_id"))
    return {"recorded": True, "audit_seq": service.plane.audit.last_seq}


def _default_window(service, query) -> tuple[int, int]:
    """Window parameters, defaulting to the configured trailing window."""
    now = service.plane.clock.now()
    end = _query_int(query, "end", now)
    start = _query_int(query, "start",
                       max(0, end - service.config.kpi_window_seconds))
    return start, end


def _h_kpi(service, match, query, body, operator):
    start, end = _default_window(service, query)
    snapshot = service.plane.kpi(start, end)
    return {"snapshot": snapshot.payload(), "rows": snapshot.rows()}


def _h_kpi_snapshot(service, match, query, body, operator):
    snapshot = service.plane.snapshot_kpis(
        int(body.get("start", 0)), int(body.get("end", service.plane.clock.now())),
        operator)
    return {"snapshot": snapshot.payload(),
            "audit_seq": service.plane.audit.last_seq}


def _h_maturity(service, match, query, body, operator):
    start, end = _default_window(service, query)
    feature_names = _query_str(query, "features")
    features = (FeatureFlags.all_enabled() if feature_names is None
                else FeatureFlags.from_names(feature_names.split(",")))
    try:
        assessment = service.plane.assess(start, end, features)
    except ValueError as exc:
        raise _bad_request(str(exc)) from exc
    return {"assessment": assessment.payload()}


def _h_audit_events(service, match, query, body, operator):
    kinds = _query_str(query, "kinds")
    events = service.plane.audit.select(
        agent_id=_query_str(query, "agent_id"),
        start=_query_int(query, "start"),
        end=_query_int(query, "end"),
        kinds=kinds.split(",") if kinds else None,
    )
    limit = _query_int(query, "limit")
    if limit is not None:
        events = events[-limit:]
    return {"events": [event_view(e) for e in events],
            "terminal_seq": service.plane.audit.last_seq,
            "terminal_hash": service.plane.audit.last_hash.hex()}


def _h_audit_verify(service, match, query, body, operator):
    from_seq = _query_int(query, "from_seq", 1)
    to_seq = _query_int(query, "to_seq")
    result = service.plane.audit.verify_chain(from_seq, to_seq)
    return {"ok": result.ok, "first_bad_seq": result.first_bad_seq,
            "problem": result.problem,
            "terminal_hash": service.plane.audit.last_hash.hex()}


def _h_audit_export(service, match, query, body, operator):
    kinds = _query_str(query, "kinds")
    bundle = service.plane.audit.export_bundle(
        agent_id=_query_str(query, "agent_id"),
        start=_query_int(query, "start"),
        end=_query_int(query, "end"),
        kinds=kinds.split(",") if kinds else None,
    )
    return 200, bundle, "application/octet-stream"


def _h_registry_export(service, match, query, body, operator):
    return 200, service.plane.registry.export_agents().encode("utf-8"), \
        "text/plain; charset=utf-8"


def _h_ui(service, match, query, body, operator):
    if service.config.ui_dir is None:
        raise _not_found("/ui (no ui_dir configured)")
    rel = match.group("asset") or "index.html"
    target = (service.config.ui_dir / rel).resolve()
    if not str(target).startswith(str(service.config.ui_dir.resolve())) \
            or not target.is_file():
        raise _not_found(f"/ui/{rel}")
    content_types = {".html": "text/html; charset=utf-8",
                     ".js": "text/javascript; charset=utf-8",
                     ".css": "text/css; charset=utf-8",
                     ".map": "application/json"}
    return 200, target.read_bytes(), content_types.get(target.suffix,
                                                       "application/octet-stream")


def _build_routes():
    def route(method, pattern, mutating, handler):
        return (method, re.compile(pattern), mutating, handler)

    agent = r"(?P<agent_id>[^/]+)"
    return [
        route("GET", r"/healthz", False, _h_healthz),
        route("POST", r"/clock/advance", True, _h_clock_advance),
        route("POST", r"/policy", True, _h_policy_load),
        route("GET", r"/policy", False, _h_policy_latest),
        route("POST", r"/agents", True, _h_register),
        route("GET", r"/agents", False, _h_agents),
        route("GET", rf"/agents/{agent}", False, _h_agent),
        route("POST", rf"/agents/{agent}/approve", True, _h_approve),
        route("POST", rf"/agents/{agent}/baseline", True, _h_update_baseline),
        route("POST", rf"/agents/{agent}/transition", True, _h_transition),
        route("POST", rf"/agents/{agent}/decommission", True, _h_decommission),
        route("POST", rf"/agents/{agent}/kill", True, _h_kill),
        route("POST", rf"/agents/{agent}/owner-departed", True, _h_owner_departed),
        route("GET", rf"/agents/{agent}/overlaps", False, _h_overlaps),
        route("POST", rf"/agents/{agent}/credentials", True, _h_issue_credential),
        route("POST", rf"/agents/{agent}/credentials/revoke", True,
              _h_revoke_credentials),
        route("POST", rf"/agents/{agent}/drift-check", True, _h_drift_check),
        route("GET", rf"/agents/{agent}/triggers", False, _h_check_triggers),
        route("GET", r"/credentials/(?P<credential_id>[^/]+)/validate", False,
              _h_validate_credential),
        route("POST", r"/mediate", True, _h_mediate),
        route("POST", r"/messages", True, _h_message),
        route("POST", r"/conflicts", True, _h_open_conflict),
        route("POST", r"/conflicts/(?P<case_id>[^/]+)/resolve", True,
              _h_resolve_conflict),
        route("GET", r"/conflicts/(?P<case_id>[^/]+)", False, _h_get_conflict),
        route("GET", r"/pending", False, _h_pending),
        route("POST", r"/pending/(?P<target_id>[^/]+)/verdict", True, _h_verdict),
        route("POST", r"/memory", True, _h_memory_write),
        route("GET", r"/memory", False, _h_memory_read),
        route("POST", r"/memory/expire", True, _h_memory_expire),
        route("POST", r"/memory/freeze", True, _h_memory_freeze),
        route("POST", r"/sweep-expired", True, _h_sweep),
        route("POST", r"/incidents", True, _h_incident),
        route("POST", r"/ungoverned/tool-call", True, _h_ungoverned_call),
        route("POST", r"/ungoverned/memory-read", True, _h_ungoverned_read),
        route("GET", r"/kpi", False, _h_kpi),
        route("POST", r"/kpi/snapshot", True, _h_kpi_snapshot),
        route("GET", r"/maturity", False, _h_maturity),
        route("GET", r"/audit/events", False, _h_audit_events),
        route("GET", r"/audit/verify", False, _h_audit_verify),
        route("GET", r"/audit/export", False, _h_audit_export),
        route("GET", r"/registry/export", False, _h_registry_export),
        route("GET", r"/ui(?:/(?P<asset>.*))?", False, _h_ui),
    ]


def _make_handler(service: GovernanceService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format, *args):    # quiet; evidence lives in the log
            pass

        def _respond(self, status: int, payload: bytes, content_type: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def _handle(self, method: str) -> None:
            parsed = urlparse(self.path)
            query = parse_qs(parsed.query)
            body = None
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if raw:
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    self._error(400, "bad_request", "request body is not valid JSON")
                    return
            operator = self.headers.get("X-Operator")
            try:
                status, payload, content_type = service.dispatch(
                    method, parsed.path, query, body, operator)
            except GovernanceError as exc:
                self._error(_STATUS_BY_CODE.get(exc.code, 500), exc.code,
                            exc.message, exc.detail)
                return
            except Exception as exc:    # pragma: no cover - defensive
                self._error(500, "governance_error", f"internal error: {exc}")
                return
            if isinstance(payload, bytes):
                self._respond(status, payload, content_type)
            else:
                self._respond(status, json.dumps(payload).encode("utf-8"),
                              content_type)

        def _error(self, status: int, code: str, message: str,
                   detail: str | None = None) -> None:
            envelope = {"code": code, "message": message, "detail": detail}
            self._respond(status, json.dumps(envelope).encode("utf-8"),
                          "application/json")

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

    return Handler


def serve(config: ServiceConfig) -> GovernanceService:
    """Start the service; returns the running handle (stop() to shut down)."""
    service = GovernanceService(config)
    try:
        service.start()
    except OSError as exc:
        raise ConfigError(f"cannot bind {config.listen_host}:{config.listen_port}: "
                          f"{exc}") from exc
    return service
