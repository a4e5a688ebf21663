/** Audit screen: filterable event stream with the chain-verify indicator. */
import { esc, table, timestamp } from "../render.js";
function chainIndicator(status) {
    if (status.ok) {
        return `<span class="badge badge-ok" id="chain-status">chain verified</span> ` +
            `<code class="hash">${esc(status.terminal_hash)}</code>`;
    }
    return `<span class="badge badge-dead" id="chain-status">chain broken at ` +
        `seq ${esc(status.first_bad_seq)}</span> <em>${esc(status.problem)}</em>`;
}
function payloadSummary(payload) {
    const interesting = ["agent_id", "persona", "to", "event", "effect", "reason",
        "verdict", "count", "trigger_id", "category"];
    const parts = [];
    for (const key of interesting) {
        if (payload[key] !== undefined && payload[key] !== null) {
            parts.push(`${key}=${String(payload[key])}`);
        }
    }
    const decision = payload["decision"];
    if (decision?.["effect"]) {
        parts.push(`effect=${String(decision["effect"])}`);
        parts.push(`rule=${String(decision["winning_rule"])}`);
    }
    return esc(parts.join("  "));
}
export function renderAudit(page, status, filter) {
    const rows = [...page.events].reverse().map((event) => [
        esc(event.seq),
        timestamp(event.timestamp),
        `<code>${esc(event.kind)}</code>`,
        esc(event.actor),
        payloadSummary(event.payload),
    ]);
    return `<section id="audit-view"><h2>Audit trail</h2>
    <p>${chainIndicator(status)}</p>
    <form id="audit-filter">
      <label>kinds <input name="kinds" value="${esc(filter.kinds)}"
        placeholder="decision,kill_switch" /></label>
      <label>agent <input name="agent_id" value="${esc(filter.agentId)}"
        placeholder="agt-…" /></label>
      <button data-action="audit-filter">filter</button>
    </form>
    ${table(["seq", "time", "kind", "actor", "summary"], rows, "no events match")}
  </section>`;
}
