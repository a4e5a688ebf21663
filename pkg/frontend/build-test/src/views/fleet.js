/** Fleet screen: the registry table with state, ownership, expiration,
 * and capability-overlap warnings; row actions follow the lifecycle. */
import { esc, stateBadge, table, timestamp } from "../render.js";
function ownerCell(agent) {
    if (!agent.accountable_owner)
        return `<span class="warn-text">unowned</span>`;
    const name = esc(agent.accountable_owner);
    return agent.owner_active
        ? name
        : `<span class="warn-text">${name} (departed)</span>`;
}
function expirationCell(agent, now) {
    if (agent.expiration === null)
        return "—";
    const when = timestamp(agent.expiration);
    return agent.expiration <= now
        ? `<span class="warn-text">${when} (lapsed)</span>`
        : when;
}
function overlapCell(agent, overlaps) {
    const hits = overlaps.get(agent.agent_id) ?? [];
    if (hits.length === 0)
        return "";
    const top = hits[0];
    return `<span class="badge badge-warn" title="closest: ${esc(top.agent_id)}">` +
        `overlap ${(top.score * 100).toFixed(0)}% ×${hits.length}</span>`;
}
function actionsCell(agent) {
    const id = esc(agent.agent_id);
    const buttons = [
        `<button data-action="detail" data-agent="${id}">detail</button>`,
    ];
    if (agent.state === "Requested") {
        buttons.push(`<button data-action="approve" data-agent="${id}" class="primary">approve</button>`);
    }
    if (agent.state === "Approved") {
        buttons.push(`<button data-action="transition" data-agent="${id}" data-event="provision">provision</button>`);
    }
    if (agent.state === "Provisioned") {
        buttons.push(`<button data-action="transition" data-agent="${id}" data-event="activate">activate</button>`);
    }
    if (agent.state === "Active") {
        buttons.push(`<button data-action="kill" data-agent="${id}" class="danger">kill switch</button>`);
    }
    if (agent.state === "Suspended") {
        buttons.push(`<button data-action="transition" data-agent="${id}" data-event="reactivate">reactivate</button>`);
    }
    if (agent.state === "Active" || agent.state === "Suspended") {
        buttons.push(`<button data-action="decommission" data-agent="${id}" class="danger">decommission</button>`);
    }
    return `<span class="actions">${buttons.join("")}</span>`;
}
export function renderFleet(data) {
    const rows = data.agents.map((agent) => [
        `<code>${esc(agent.agent_id)}</code>`,
        esc(agent.persona),
        esc(agent.domain_class),
        stateBadge(agent.state),
        ownerCell(agent),
        expirationCell(agent, data.now),
        overlapCell(agent, data.overlaps),
        actionsCell(agent),
    ]);
    return `<section id="fleet-view"><h2>Fleet</h2>` +
        table(["agent", "persona", "domain", "state", "owner", "expiration",
            "redundancy", "actions"], rows, "no agents registered") +
        `</section>`;
}
