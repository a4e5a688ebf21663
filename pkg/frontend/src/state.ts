/** Console store: polls the service and keeps the last known snapshot.
 *
 * The console never trusts its own writes: after every action the store
 * re-fetches, so whatever the screen shows has been confirmed by the
 * service within one refresh interval. A fetch failure flips `offline`
 * and the last snapshot stays visible read-only.
 */

import { ApiClient, Unreachable } from "./api.js";
import type {
  AgentView,
  AuditPage,
  ChainStatus,
  KpiSnapshot,
  MaturityAssessment,
  OverlapHit,
  PendingQueue,
} from "./types.js";
import type { AuditFilter } from "./views/audit.js";

export const OVERLAP_THRESHOLD = 0.75;

export interface Snapshot {
  now: number;
  agents: AgentView[];
  overlaps: Map<string, OverlapHit[]>;
  pending: PendingQueue;
  kpi: KpiSnapshot | null;
  maturity: MaturityAssessment | null;
  audit: AuditPage;
  chain: ChainStatus;
}

export class Store {
  offline = false;
  snapshot: Snapshot | null = null;
  auditFilter: AuditFilter = { kinds: "", agentId: "" };

  constructor(readonly client: ApiClient) {}

  async refresh(): Promise<Snapshot | null> {
    try {
      const health = await this.client.healthz();
      const agents = await this.client.agents();
      const overlaps = new Map<string, OverlapHit[]>();
      for (const agent of agents) {
        if (agent.state !== "Decommissioned") {
          overlaps.set(agent.agent_id,
                       await this.client.overlaps(agent.agent_id,
                                                  OVERLAP_THRESHOLD));
        }
      }
      const pending = await this.client.pending();
      const audit = await this.client.auditEvents({
        kinds: this.auditFilter.kinds || undefined,
        agent_id: this.auditFilter.agentId || undefined,
        limit: 200,
      });
      const chain = await this.client.verifyChain();
      let kpi: KpiSnapshot | null = null;
      let maturity: MaturityAssessment | null = null;
      if (audit.terminal_seq > 0) {   // any history at all, filtered or not
        const start = 0;
        const end = Math.max(health.now, 1);
        kpi = await this.client.kpi(start, end);
        maturity = await this.client.maturity(start, end);
      }
      this.snapshot = { now: health.now, agents, overlaps, pending, kpi,
                        maturity, audit, chain };
      this.offline = false;
      return this.snapshot;
    } catch (error) {
      if (error instanceof Unreachable) {
        this.offline = true;
        return this.snapshot;   // degraded: keep showing the last state
      }
      throw error;
    }
  }
}
