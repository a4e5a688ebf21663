/** Wire types mirroring the service's JSON bodies (docs/api.md). */

export interface AgentView {
  agent_id: string;
  persona: string;
  domain_class: string;
  scope_of_practice: string[];
  allowed_tools: string[];
  data_scopes: string[];
  state: string;
  accountable_owner: string | null;
  owner_active: boolean;
  liability_owner: string | null;
  expiration: number | null;
  registered_at: number;
  baseline: BaselineView | null;
}

export interface BaselineView {
  policy_version: number;
  model_id: string;
  prompt_hash: string;
  config_hash: string;
  approved_at: number;
}

export interface CredentialView {
  credential_id: string;
  agent_id: string;
  issued_at: number;
  expires_at: number;
  status: string;
  revoked_at: number | null;
  scope_claims: string[];
}

export interface AgentDetail {
  agent: AgentView;
  credentials: CredentialView[];
  drift_findings: DriftFinding[];
  termination_report: TerminationReport | null;
}

export interface DriftFinding {
  agent_id: string;
  detected_at: number;
  dimensions: string[];
  observed: Record<string, unknown>;
  baseline_policy_version: number;
}

export interface TerminationReport {
  agent_id: string;
  reason: string;
  initiated_by: string;
  revoked_credentials: number;
  frozen_entries: number;
  final_decision_log_digest: string;
  completed_at: number;
}

export interface KillReport {
  agent_id: string;
  trigger_id: string;
  reason: string;
  revoked_credentials: number;
  cancelled_pending: number;
  fired_at: number;
}

export interface PendingRequest {
  request: {
    request_id: string;
    agent_id: string;
    credential_id: string;
    tool: string;
    resources: [string, boolean][];
    workflow_id: string | null;
    intent: string;
    submitted_at: number;
    channel: string;
  };
  outcome: {
    request_id: string;
    decision_id: string;
    disposition: string;
    completed_at: number | null;
  };
}

export interface ConflictCase {
  case_id: string;
  agents: [string, string];
  contested: string;
  claims: Record<string, { domain_class: string; objective: string }>;
  status: string;
  resolution: string | null;
}

export interface PendingQueue {
  requests: PendingRequest[];
  cases: ConflictCase[];
}

export interface KpiSnapshot {
  window_start: number;
  window_end: number;
  ownership_coverage: number;
  median_revocation_latency: number | null;
  decision_coverage: number;
  orphan_count: number;
  phi_minimization_rate: number;
  control_drift_rate: number;
  incident_rate: number;
  computed_at: number;
}

export interface MaturityAssessment {
  level: number;
  level_name: string;
  evidence: { level: number; criterion: string; passed: boolean; measured: unknown }[];
  assessed_at: number;
}

export interface AuditEventView {
  seq: number;
  timestamp: number;
  kind: string;
  actor: string;
  payload_digest: string;
  prev_hash: string;
  hash: string;
  payload: Record<string, unknown>;
}

export interface AuditPage {
  events: AuditEventView[];
  terminal_seq: number;
  terminal_hash: string;
}

export interface ChainStatus {
  ok: boolean;
  first_bad_seq: number | null;
  problem: string | null;
  terminal_hash: string;
}

export interface OverlapHit {
  agent_id: string;
  score: number;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  detail: string | null;
}
