"""HTTP client for the wire API (stdlib urllib; no extra dependencies).

Raises the same typed errors as the in-process plane by rebuilding them
from the error envelope, so callers can be transport-agnostic.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request
from typing import Any

from .errors import GovernanceError, error_for_code


class ServiceClient:
    def __init__(self, base_url: str, operator: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.operator = operator
        self.timeout = timeout

    # -- transport ------------------------------------------------------

    def request(self, method: str, path: str, body: dict[str, Any] | None = None,
                query: dict[str, Any] | None = None, raw: bool = False):
        url = self.base_url + path
        if query:
            filtered = {k: v for k, v in query.items() if v is not None}
            if filtered:
                url += "?" + urllib.parse.urlencode(filtered)
        data = json.dumps(body).encode("utf-8") if body is not None else None
        request = urllib.request.Request(url, data=data, method=method)
        request.add_header("X-Operator", self.operator)
        if data is not None:
            request.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = response.read()
        except urllib.error.HTTPError as exc:
            envelope = exc.read()
            try:
                parsed = json.loads(envelope)
            except json.JSONDecodeError:
                raise GovernanceError(f"HTTP {exc.code}: {envelope[:200]!r}") from exc
            raise error_for_code(parsed.get("code", "governance_error"),
                                 parsed.get("message", ""),
                                 parsed.get("detail")) from exc
        if raw:
            return payload
        return json.loads(payload)

    def get(self, path: str, **query):
        return self.request("GET", path, query=query or None)

    def post(self, path: str, body: dict[str, Any] | None = None):
        return self.request("POST", path, body=body or {})

    # -- convenience wrappers ------------------------------------------------

    def healthz(self):
        return self.get("/healthz")

    def advance_clock(self, seconds: int) -> int:
        return self.post("/clock/advance", {"seconds": seconds})["now"]

    def load_policy(self, document: str) -> int:
        return self.post("/policy", {"document": document})["policy_version"]

    def register(self, persona: str, domain_class: str, scope: list[str],
                 tools: list[str], data_scopes: list[str],
                 override_duplicate: bool = False) -> dict[str, Any]:
        return self.post("/agents", {
            "persona": persona,
            "domain_class": domain_class,
            "scope_of_practice": scope,
            "allowed_tools": tools,
            "data_scopes": data_scopes,
            "override_duplicate": override_duplicate,
        })["agent"]

    def agents(self) -> list[dict[str, Any]]:
        return self.get("/agents")["agents"]

    def agent(self, agent_id: str) -> dict[str, Any]:
        return self.get(f"/agents/{agent_id}")

    def approve(self, agent_id: str, owner: str, liability: str | None,
                expiration: int, baseline: dict[str, Any]) -> dict[str, Any]:
        return self.post(f"/agents/{agent_id}/approve", {
            "accountable_owner": owner,
            "liability_owner": liability,
            "expiration": expiration,
            "baseline": baseline,
        })["agent"]

    def transition(self, agent_id: str, event: str, reason: str | None = None) -> str:
        return self.post(f"/agents/{agent_id}/transition",
                         {"event": event, "reason": reason})["state"]

    def decommission(self, agent_id: str, reason: str) -> dict[str, Any]:
        return self.post(f"/agents/{agent_id}/decommission",
                         {"reason": reason})["termination_report"]

    def kill(self, agent_id: str, trigger_id: str, reason: str) -> dict[str, Any]:
        return self.post(f"/agents/{agent_id}/kill",
                         {"trigger_id": trigger_id, "reason": reason})["kill_report"]

    def issue_credential(self, agent_id: str, scope_claims: list[str],
                         ttl: int) -> dict[str, Any]:
        return self.post(f"/agents/{agent_id}/credentials",
                         {"scope_claims": scope_claims, "ttl": ttl})["credential"]

    def mediate(self, agent_id: str, credential_id: str, tool: str,
                resources: list[list[Any]] | None = None,
                workflow_id: str | None = None, intent: str = "",
                request_id: str | None = None) -> dict[str, Any]:
        return self.post("/mediate", {
            "agent_id": agent_id,
            "credential_id": credential_id,
            "tool": tool,
            "resources": resources or [],
            "workflow_id": workflow_id,
            "intent": intent,
            "request_id": request_id,
        })["outcome"]

    def pending(self) -> dict[str, Any]:
        return self.get("/pending")

    def verdict(self, target_id: str, verdict: str, note: str = "") -> dict[str, Any]:
        return self.post(f"/pending/{target_id}/verdict",
                         {"verdict": verdict, "note": note})["result"]

    def kpi(self, start: int, end: int) -> dict[str, Any]:
        return self.get("/kpi", start=start, end=end)["snapshot"]

    def maturity(self, start: int, end: int,
                 features: list[str] | None = None) -> dict[str, Any]:
        return self.get("/maturity", start=start, end=end,
                        features=",".join(features) if features else None)["assessment"]

    def audit_events(self, **query) -> dict[str, Any]:
        return self.get("/audit/events", **query)

    def verify_audit(self) -> dict[str, Any]:
        return self.get("/audit/verify")

    def export_bundle(self, **query) -> bytes:
        return self.request("GET", "/audit/export", query=query or None, raw=True)


class HttpDriver:
    """ScenarioDriver over the wire API (see fleetgov.simulator)."""

    def __init__(self, client: ServiceClient):
        self.client = client

    def advance(self, seconds):
        return self.client.advance_clock(seconds)

    def now(self):
        return self.client.healthz()["now"]

    def load_policy(self, document):
        return self.client.load_policy(document)

    def register(self, persona, domain_class, scope, tools, data_scopes,
                 override_duplicate=False):
        return self.client.register(persona, domain_class, scope, tools, data_scopes,
                                    override_duplicate)["agent_id"]

    def approve(self, agent_id, owner, liability, expiration, baseline):
        self.client.approve(agent_id, owner, liability, expiration, baseline)

    def transition(self, agent_id, event):
        return self.client.transition(agent_id, event)

    def issue_credential(self, agent_id, scope, ttl):
        return self.client.issue_credential(agent_id, scope, ttl)["credential_id"]

    def mediate(self, agent_id, credential_id, tool, resources, workflow_id, intent):
        return self.client.mediate(agent_id, credential_id, tool, resources,
                                   workflow_id, intent)

    def write_memory(self, agent_id, shard_key, category, phi, payload_hex, ttl,
                     workflow_id):
        return self.client.post("/memory", {
            "agent_id": agent_id, "shard_key": shard_key, "data_category": category,
            "phi": phi, "payload": payload_hex, "ttl": ttl,
            "workflow_id": workflow_id,
        })["entry_id"]

    def read_memory(self, agent_id, shard_key, workflow_id):
        return self.client.get("/memory", agent_id=agent_id, shard_key=shard_key,
                               workflow_id=workflow_id)["count"]

    def record_ungoverned_call(self, agent_id, tool, resources, workflow_id, intent):
        return self.client.post("/ungoverned/tool-call", {
            "agent_id": agent_id, "tool": tool, "resources": resources,
            "workflow_id": workflow_id, "intent": intent,
        })["request_id"]

    def record_ungoverned_read(self, agent_id, shard_key, categories, phi_returned,
                               count, workflow_id):
        self.client.post("/ungoverned/memory-read", {
            "agent_id": agent_id, "shard_key": shard_key, "categories": categories,
            "phi_returned": phi_returned, "count": count, "workflow_id": workflow_id,
        })

    def mark_owner_departed(self, agent_id):
        self.client.post(f"/agents/{agent_id}/owner-departed")

    def detect_drift(self, agent_id, observed):
        finding = self.client.post(f"/agents/{agent_id}/drift-check",
                                   {"observed": observed})["finding"]
        return finding is not None

    def report_incident(self, agent_id, category, severity, workflow_id):
        self.client.post("/incidents", {
            "agent_id": agent_id, "category": category, "severity": severity,
            "workflow_id": workflow_id,
        })

    def open_conflict(self, agent_a, agent_b, contested, claims):
        return self.client.post("/conflicts", {
            "agents": [agent_a, agent_b], "contested": contested, "claims": claims,
        })["case"]["case_id"]

    def resolve_conflict(self, case_id):
        return self.client.post(f"/conflicts/{case_id}/resolve")["case"]["status"]

    def check_triggers(self, agent_id):
        return self.client.get(f"/agents/{agent_id}/triggers")["fired"]

    def fire_kill_switch(self, agent_id, trigger_id, reason):
        self.client.kill(agent_id, trigger_id, reason)

    def submit_verdict(self, target_id, verdict, note):
        self.client.verdict(target_id, verdict, note)

    def decommission(self, agent_id, reason):
        self.client.decommission(agent_id, reason)

    def sweep_expired(self):
        return self.client.post("/sweep-expired")["suspended"]

    def expire_memories(self):
        return self.client.post("/memory/expire")["purged"]

    def snapshot_kpis(self, start, end):
        return self.client.post("/kpi/snapshot", {"start": start, "end": end})["snapshot"]

    def event_count(self):
        return self.client.healthz()["events"]

    def terminal_digest(self):
        return bytes.fromhex(self.client.verify_audit()["terminal_hash"])

    def verify_chain(self):
        return self.client.verify_audit()["ok"]
