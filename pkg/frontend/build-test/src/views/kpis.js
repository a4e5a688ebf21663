/** KPI screen: the seven-metric panel plus the maturity level with its
 * per-criterion evidence. */
import { esc, fraction, table, timestamp } from "../render.js";
const KPI_PANELS = [
    ["ownership_coverage", "ownership coverage", "fraction"],
    ["median_revocation_latency", "median revocation latency (s)", "latency"],
    ["decision_coverage", "decision coverage", "fraction"],
    ["orphan_count", "orphan agents", "count"],
    ["phi_minimization_rate", "PHI minimization", "fraction"],
    ["control_drift_rate", "control drift", "fraction"],
    ["incident_rate", "incidents / agent-day", "rate"],
];
function panel(label, value, tone) {
    return `<div class="stat ${tone}"><div class="stat-label">${esc(label)}</div>` +
        `<div class="stat-value">${esc(value)}</div></div>`;
}
function toneFor(name, value) {
    if (value === null)
        return "";
    switch (name) {
        case "ownership_coverage":
        case "decision_coverage":
            return value >= 0.95 ? "stat-ok" : "stat-warn";
        case "phi_minimization_rate":
            return value >= 0.9 ? "stat-ok" : "stat-warn";
        case "control_drift_rate":
            return value <= 0.05 ? "stat-ok" : "stat-warn";
        case "orphan_count":
            return value === 0 ? "stat-ok" : "stat-warn";
        default:
            return "";
    }
}
export function renderKpis(snapshot, assessment) {
    const panels = KPI_PANELS.map(([name, label, kind]) => {
        const raw = snapshot[name];
        const value = kind === "count" ? String(raw)
            : kind === "latency" ? (raw === null ? "—" : raw.toFixed(1))
                : kind === "rate" ? raw.toFixed(4)
                    : fraction(raw);
        return panel(label, value, toneFor(name, raw));
    }).join("");
    const evidence = table(["level", "criterion", "measured", "result"], assessment.evidence.map((item) => [
        esc(item.level),
        esc(item.criterion),
        esc(typeof item.measured === "number"
            ? item.measured.toFixed(3) : String(item.measured)),
        item.passed
            ? `<span class="badge badge-ok">pass</span>`
            : `<span class="badge badge-dead">fail</span>`,
    ]));
    return `<section id="kpi-view"><h2>Governance KPIs</h2>
    <p class="hint">window ${timestamp(snapshot.window_start)} —
      ${timestamp(snapshot.window_end)}</p>
    <div class="stats">${panels}</div>
    <h3>Maturity: level ${esc(assessment.level)}
      (${esc(assessment.level_name)})</h3>
    ${evidence}
  </section>`;
}
