/** Pending screen: require_human requests plus escalated conflicts, each
 * with explicit approve/deny controls and a note field. */
import { esc, table, timestamp } from "../render.js";
function verdictButtons(targetId, kind) {
    const id = esc(targetId);
    return `<span class="actions">` +
        `<input type="text" class="note-input" data-note-for="${id}" placeholder="note" />` +
        `<button data-action="verdict" data-target="${id}" data-verdict="allow" ` +
        `data-kind="${esc(kind)}" class="primary">approve</button>` +
        `<button data-action="verdict" data-target="${id}" data-verdict="deny" ` +
        `data-kind="${esc(kind)}" class="danger">deny</button></span>`;
}
export function renderPending(queue) {
    const requestRows = queue.requests.map((item) => [
        `<code>${esc(item.request.request_id)}</code>`,
        `<code>${esc(item.request.agent_id)}</code>`,
        esc(item.request.tool),
        esc(item.request.intent || "—"),
        timestamp(item.request.submitted_at),
        verdictButtons(item.request.request_id, "request"),
    ]);
    const caseRows = queue.cases.map((conflict) => {
        const [a, b] = conflict.agents;
        const claimA = conflict.claims[a];
        const claimB = conflict.claims[b];
        return [
            `<code>${esc(conflict.case_id)}</code>`,
            esc(conflict.contested),
            `<code>${esc(a)}</code> — ${esc(claimA?.domain_class ?? "?")}: ${esc(claimA?.objective ?? "")}`,
            `<code>${esc(b)}</code> — ${esc(claimB?.domain_class ?? "?")}: ${esc(claimB?.objective ?? "")}`,
            verdictButtons(conflict.case_id, "conflict"),
        ];
    });
    return `<section id="pending-view"><h2>Pending human review</h2>` +
        `<h3>Requests awaiting a verdict</h3>` +
        table(["request", "agent", "tool", "intent", "submitted", "verdict"], requestRows, "no requests waiting") +
        `<h3>Escalated conflicts</h3>` +
        `<p class="hint">approve upholds the first-listed agent's claim; deny the second's</p>` +
        table(["case", "contested", "first claim", "second claim", "verdict"], caseRows, "no escalated conflicts") +
        `</section>`;
}
