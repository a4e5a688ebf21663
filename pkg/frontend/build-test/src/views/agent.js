/** Agent detail screen: identity, scopes, credentials, approved baseline
 * with a drift-check form, drift findings, and the contained-agent
 * controls (kill switch / decommission, both confirm-gated). */
import { esc, stateBadge, table, timestamp } from "../render.js";
export function renderAgentDetail(detail) {
    const agent = detail.agent;
    const id = esc(agent.agent_id);
    const identity = table(["field", "value"], [
        ["agent_id", `<code>${id}</code>`],
        ["persona", esc(agent.persona)],
        ["domain class", esc(agent.domain_class)],
        ["state", stateBadge(agent.state)],
        ["accountable owner", esc(agent.accountable_owner ?? "—") +
                (agent.owner_active ? "" : ` <span class="warn-text">(departed)</span>`)],
        ["liability owner", esc(agent.liability_owner ?? "—")],
        ["scope of practice", esc(agent.scope_of_practice.join(", "))],
        ["allowed tools", esc(agent.allowed_tools.join(", "))],
        ["data scopes", esc(agent.data_scopes.join(", "))],
        ["registered", timestamp(agent.registered_at)],
        ["expiration", timestamp(agent.expiration)],
    ]);
    const credentials = table(["credential", "status", "issued", "expires", "claims"], detail.credentials.map((credential) => [
        `<code>${esc(credential.credential_id)}</code>`,
        credential.status === "active"
            ? `<span class="badge badge-ok">active</span>`
            : `<span class="badge badge-dead">revoked</span>`,
        timestamp(credential.issued_at),
        timestamp(credential.expires_at),
        esc(credential.scope_claims.join(", ")),
    ]), "no credentials issued");
    const baseline = agent.baseline === null
        ? `<p class="empty">no approved baseline</p>`
        : table(["dimension", "approved value"], [
            ["policy_version", esc(agent.baseline.policy_version)],
            ["model_id", esc(agent.baseline.model_id)],
            ["prompt_hash", `<code>${esc(agent.baseline.prompt_hash)}</code>`],
            ["config_hash", `<code>${esc(agent.baseline.config_hash)}</code>`],
            ["approved_at", timestamp(agent.baseline.approved_at)],
        ]);
    const driftForm = agent.baseline === null ? "" : `
    <h3>Check observed configuration</h3>
    <form id="drift-form" data-agent="${id}">
      <label>policy_version <input name="policy_version"
        value="${esc(agent.baseline.policy_version)}" /></label>
      <label>model_id <input name="model_id"
        value="${esc(agent.baseline.model_id)}" /></label>
      <label>prompt_hash <input name="prompt_hash"
        value="${esc(agent.baseline.prompt_hash)}" /></label>
      <label>config_hash <input name="config_hash"
        value="${esc(agent.baseline.config_hash)}" /></label>
      <button data-action="drift-check" data-agent="${id}">compare to baseline</button>
    </form>
    <div id="drift-result"></div>`;
    const findings = table(["detected", "drifted dimensions", "baseline policy version"], detail.drift_findings.map((finding) => [
        timestamp(finding.detected_at),
        esc(finding.dimensions.join(", ")),
        esc(finding.baseline_policy_version),
    ]), "no drift findings");
    const termination = detail.termination_report === null ? "" :
        `<h3>Termination report</h3>` + table(["field", "value"], [
            ["reason", esc(detail.termination_report.reason)],
            ["initiated by", esc(detail.termination_report.initiated_by)],
            ["credentials revoked", esc(detail.termination_report.revoked_credentials)],
            ["entries frozen", esc(detail.termination_report.frozen_entries)],
            ["decision log digest",
                `<code>${esc(detail.termination_report.final_decision_log_digest)}</code>`],
            ["completed", timestamp(detail.termination_report.completed_at)],
        ]);
    const containment = [];
    if (agent.state === "Active") {
        containment.push(`<button data-action="kill" data-agent="${id}" class="danger">fire kill switch</button>`);
    }
    if (agent.state === "Active" || agent.state === "Suspended") {
        containment.push(`<button data-action="decommission" data-agent="${id}" class="danger">decommission</button>`);
    }
    return `<section id="agent-view">
    <p><button data-action="back-to-fleet">← fleet</button></p>
    <h2>${esc(agent.persona)}</h2>
    ${identity}
    <h3>Credentials</h3>
    ${credentials}
    <h3>Approved baseline</h3>
    ${baseline}
    ${driftForm}
    <h3>Drift findings</h3>
    ${findings}
    ${termination}
    ${containment.length
        ? `<h3>Containment</h3><p class="actions">${containment.join("")}</p>`
        : ""}
  </section>`;
}
