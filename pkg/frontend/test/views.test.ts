import assert from "node:assert/strict";
import { test } from "node:test";

import { renderAgentDetail } from "../src/views/agent.js";
import { renderAudit } from "../src/views/audit.js";
import { renderFleet } from "../src/views/fleet.js";
import { renderKpis } from "../src/views/kpis.js";
import { renderPending } from "../src/views/pending.js";
import type {
  AgentDetail,
  AgentView,
  KpiSnapshot,
  MaturityAssessment,
  PendingQueue,
} from "../src/types.js";

function agent(overrides: Partial<AgentView> = {}): AgentView {
  return {
    agent_id: "agt-1",
    persona: "sepsis-watch",
    domain_class: "patient_safety",
    scope_of_practice: ["vitals_monitoring"],
    allowed_tools: ["read_vitals"],
    data_scopes: ["vitals"],
    state: "Active",
    accountable_owner: "dr.a",
    owner_active: true,
    liability_owner: "unit.icu",
    expiration: 10_000_000,
    registered_at: 1000,
    baseline: {
      policy_version: 1, model_id: "m-1",
      prompt_hash: "00".repeat(32), config_hash: "11".repeat(32),
      approved_at: 1000,
    },
    ...overrides,
  };
}

test("fleet view: actions follow the lifecycle state", () => {
  const html = renderFleet({
    agents: [
      agent(),
      agent({ agent_id: "agt-2", state: "Requested", accountable_owner: null,
              baseline: null, expiration: null }),
      agent({ agent_id: "agt-3", state: "Suspended" }),
    ],
    overlaps: new Map([["agt-1", [{ agent_id: "agt-3", score: 1.0 }]]]),
    now: 5000,
  });
  assert.match(html, /data-action="kill" data-agent="agt-1"/);
  assert.match(html, /data-action="approve" data-agent="agt-2"/);
  assert.match(html, /data-event="reactivate"/);
  assert.match(html, /overlap 100%/);
  assert.doesNotMatch(html, /data-action="kill" data-agent="agt-2"/);
});

test("fleet view: flags unowned, departed, and lapsed agents", () => {
  const html = renderFleet({
    agents: [
      agent({ accountable_owner: null }),
      agent({ agent_id: "agt-4", owner_active: false }),
      agent({ agent_id: "agt-5", expiration: 10 }),
    ],
    overlaps: new Map(),
    now: 5000,
  });
  assert.match(html, /unowned/);
  assert.match(html, /departed/);
  assert.match(html, /lapsed/);
});

test("pending view: verdict buttons for requests and conflicts", () => {
  const queue: PendingQueue = {
    requests: [{
      request: {
        request_id: "req-7", agent_id: "agt-1", credential_id: "crd-1",
        tool: "order_medication", resources: [["medications", true]],
        workflow_id: "w1", intent: "adjust dose", submitted_at: 500,
        channel: "gateway",
      },
      outcome: { request_id: "req-7", decision_id: "dec-1",
                 disposition: "pending_human", completed_at: null },
    }],
    cases: [{
      case_id: "cas-2", agents: ["agt-1", "agt-2"], contested: "bed-7",
      claims: {
        "agt-1": { domain_class: "clinical_outcome", objective: "treat" },
        "agt-2": { domain_class: "clinical_outcome", objective: "schedule" },
      },
      status: "escalated", resolution: null,
    }],
  };
  const html = renderPending(queue);
  assert.match(html, /data-action="verdict" data-target="req-7" data-verdict="allow"/);
  assert.match(html, /data-action="verdict" data-target="cas-2" data-verdict="deny"/);
  assert.match(html, /order_medication/);
  assert.match(html, /upholds the first-listed agent/);
});

test("agent detail: baseline, drift form, and confirm-gated containment", () => {
  const detail: AgentDetail = {
    agent: agent(),
    credentials: [{
      credential_id: "crd-1", agent_id: "agt-1", issued_at: 100,
      expires_at: 900_000, status: "active", revoked_at: null,
      scope_claims: ["read_vitals"],
    }],
    drift_findings: [{
      agent_id: "agt-1", detected_at: 2000, dimensions: ["prompt_hash"],
      observed: {}, baseline_policy_version: 1,
    }],
    termination_report: null,
  };
  const html = renderAgentDetail(detail);
  assert.match(html, /data-action="kill"/);
  assert.match(html, /data-action="decommission"/);
  assert.match(html, /drift-form/);
  assert.match(html, /prompt_hash/);
  assert.match(html, /badge-ok">active/);
});

test("agent detail: decommissioned agents expose no containment actions", () => {
  const detail: AgentDetail = {
    agent: agent({ state: "Decommissioned" }),
    credentials: [],
    drift_findings: [],
    termination_report: {
      agent_id: "agt-1", reason: "sunset", initiated_by: "op.a",
      revoked_credentials: 2, frozen_entries: 3,
      final_decision_log_digest: "ab".repeat(32), completed_at: 9000,
    },
  };
  const html = renderAgentDetail(detail);
  assert.doesNotMatch(html, /data-action="kill"/);
  assert.doesNotMatch(html, /data-action="decommission"/);
  assert.match(html, /Termination report/);
  assert.match(html, /sunset/);
});

test("kpi view: seven panels and the evidence table", () => {
  const snapshot: KpiSnapshot = {
    window_start: 0, window_end: 86400, ownership_coverage: 1.0,
    median_revocation_latency: 0, decision_coverage: 0.9, orphan_count: 2,
    phi_minimization_rate: 1.0, control_drift_rate: 0.0, incident_rate: 0.01,
    computed_at: 86400,
  };
  const assessment: MaturityAssessment = {
    level: 2, level_name: "Managed", assessed_at: 86400,
    evidence: [
      { level: 2, criterion: "ownership_coverage >= 1.0", passed: true,
        measured: 1.0 },
      { level: 3, criterion: "feature policy_enforcement", passed: false,
        measured: false },
    ],
  };
  const html = renderKpis(snapshot, assessment);
  assert.equal((html.match(/stat-label/g) ?? []).length, 7);
  assert.match(html, /level 2/);
  assert.match(html, /Managed/);
  assert.match(html, /badge-dead">fail/);
  assert.match(html, /stat-warn/);   // degraded decision coverage flagged
});

test("audit view: chain indicator and filter form", () => {
  const html = renderAudit(
    {
      events: [{
        seq: 1, timestamp: 50, kind: "registration", actor: "op.a",
        payload_digest: "aa", prev_hash: "00", hash: "bb",
        payload: { agent_id: "agt-1", persona: "sepsis-watch" },
      }],
      terminal_seq: 1, terminal_hash: "bb".repeat(16),
    },
    { ok: true, first_bad_seq: null, problem: null,
      terminal_hash: "bb".repeat(16) },
    { kinds: "registration", agentId: "" },
  );
  assert.match(html, /chain verified/);
  assert.match(html, /agent_id=agt-1/);
  assert.match(html, /value="registration"/);
});

test("audit view: broken chain is loud", () => {
  const html = renderAudit(
    { events: [], terminal_seq: 3, terminal_hash: "cc" },
    { ok: false, first_bad_seq: 2, problem: "chain hash mismatch",
      terminal_hash: "cc" },
    { kinds: "", agentId: "" },
  );
  assert.match(html, /chain broken at\s+seq 2/);
  assert.match(html, /chain hash mismatch/);
});
