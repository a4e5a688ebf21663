/** Thin client over the wire API.
 *
 * The console holds no authority of its own: every call goes to the
 * service, every mutating call carries the session's operator identity
 * in `X-Operator`, and failures surface the server's error envelope
 * verbatim as an {@link ApiError}. Authorization lives server-side.
 */

import type {
  AgentDetail,
  AgentView,
  AuditPage,
  ChainStatus,
  ErrorEnvelope,
  KillReport,
  KpiSnapshot,
  MaturityAssessment,
  OverlapHit,
  PendingQueue,
  TerminationReport,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly detail: string | null;

  constructor(envelope: ErrorEnvelope) {
    super(envelope.message);
    this.code = envelope.code;
    this.detail = envelope.detail;
  }
}

export class Unreachable extends Error {}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface Session {
  baseUrl: string;
  operator: string;
  refreshSeconds: number;
}

export class ApiClient {
  constructor(
    private readonly session: Session,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    if (!session.operator) {
      throw new Error("a console session requires an operator identity");
    }
  }

  get operator(): string {
    return this.session.operator;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "X-Operator": this.session.operator };
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.session.baseUrl + path, init);
    } catch (error) {
      throw new Unreachable(`API unreachable: ${String(error)}`);
    }
    const text = await response.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        throw new ApiError({
          code: "bad_response",
          message: `non-JSON response (${response.status})`,
          detail: text.slice(0, 200),
        });
      }
    }
    if (!response.ok) {
      throw new ApiError(parsed as ErrorEnvelope);
    }
    return parsed as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>("GET", path);
  }

  private post<T>(path: string, body: unknown = {}): Promise<T> {
    return this.request<T>("POST", path, body);
  }

  // -- reads -------------------------------------------------------

  healthz(): Promise<{ status: string; now: number; events: number }> {
    return this.get("/healthz");
  }

  async agents(): Promise<AgentView[]> {
    const body = await this.get<{ agents: AgentView[] }>("/agents");
    return body.agents;
  }

  agentDetail(agentId: string): Promise<AgentDetail> {
    return this.get(`/agents/${agentId}`);
  }

  async overlaps(agentId: string, threshold: number): Promise<OverlapHit[]> {
    const body = await this.get<{ overlaps: OverlapHit[] }>(
      `/agents/${agentId}/overlaps?threshold=${threshold}`);
    return body.overlaps;
  }

  pending(): Promise<PendingQueue> {
    return this.get("/pending");
  }

  async kpi(start: number, end: number): Promise<KpiSnapshot> {
    const body = await this.get<{ snapshot: KpiSnapshot }>(
      `/kpi?start=${start}&end=${end}`);
    return body.snapshot;
  }

  async maturity(start: number, end: number): Promise<MaturityAssessment> {
    const body = await this.get<{ assessment: MaturityAssessment }>(
      `/maturity?start=${start}&end=${end}`);
    return body.assessment;
  }

  auditEvents(params: { kinds?: string; agent_id?: string; limit?: number }):
      Promise<AuditPage> {
    const query = new URLSearchParams();
    if (params.kinds) query.set("kinds", params.kinds);
    if (params.agent_id) query.set("agent_id", params.agent_id);
    if (params.limit) query.set("limit", String(params.limit));
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.get(`/audit/events${suffix}`);
  }

  verifyChain(): Promise<ChainStatus> {
    return this.get("/audit/verify");
  }

  // -- actions ------------------------------------------------------

  async approveAgent(agentId: string, input: {
    owner: string; liability: string | null; expiresInDays: number;
    modelId: string; promptHashHex: string; configHashHex: string;
    policyVersion: number;
  }): Promise<AgentView> {
    const now = (await this.healthz()).now;
    const body = await this.post<{ agent: AgentView }>(`/agents/${agentId}/approve`, {
      accountable_owner: input.owner,
      liability_owner: input.liability,
      expiration: now + input.expiresInDays * 86400,
      baseline: {
        policy_version: input.policyVersion,
        model_id: input.modelId,
        prompt_hash: input.promptHashHex,
        config_hash: input.configHashHex,
        approved_at: now,
      },
    });
    return body.agent;
  }

  async transition(agentId: string, event: string): Promise<string> {
    const body = await this.post<{ state: string }>(
      `/agents/${agentId}/transition`, { event });
    return body.state;
  }

  /** Kill switch. The UI must set `confirmed` only after an explicit
   * confirmation step; this guard keeps shortcuts out of the codebase. */
  async fireKillSwitch(agentId: string, reason: string,
                       confirmed: boolean): Promise<KillReport> {
    if (!confirmed) {
      throw new Error("kill switch requires explicit confirmation");
    }
    const body = await this.post<{ kill_report: KillReport }>(
      `/agents/${agentId}/kill`, { trigger_id: "manual", reason });
    return body.kill_report;
  }

  async decommission(agentId: string, reason: string,
                     confirmed: boolean): Promise<TerminationReport> {
    if (!confirmed) {
      throw new Error("decommission requires explicit confirmation");
    }
    const body = await this.post<{ termination_report: TerminationReport }>(
      `/agents/${agentId}/decommission`, { reason });
    return body.termination_report;
  }

  async submitVerdict(targetId: string, verdict: "allow" | "deny",
                      note: string): Promise<unknown> {
    const body = await this.post<{ result: unknown }>(
      `/pending/${targetId}/verdict`, { verdict, note });
    return body.result;
  }

  async checkDrift(agentId: string, observed: {
    policy_version: number; model_id: string;
    prompt_hash: string; config_hash: string;
  }): Promise<{ finding: unknown | null }> {
    return this.post(`/agents/${agentId}/drift-check`, { observed });
  }
}
