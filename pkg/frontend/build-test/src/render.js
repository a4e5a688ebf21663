/** Pure HTML-string builders shared by every view (kept DOM-free so the
 * test suite can assert on output without a browser). */
export function esc(value) {
    return String(value ?? "")
        .replaceAll("&", "&amp;")
        .replaceAll("<", "&lt;")
        .replaceAll(">", "&gt;")
        .replaceAll('"', "&quot;");
}
const STATE_CLASSES = {
    Requested: "badge-muted",
    Approved: "badge-info",
    Provisioned: "badge-info",
    Active: "badge-ok",
    Suspended: "badge-warn",
    Decommissioned: "badge-dead",
};
export function stateBadge(state) {
    const cls = STATE_CLASSES[state] ?? "badge-muted";
    return `<span class="badge ${cls}" data-state="${esc(state)}">${esc(state)}</span>`;
}
export function effectBadge(effect) {
    const cls = effect === "allow" ? "badge-ok"
        : effect === "deny" ? "badge-dead" : "badge-warn";
    return `<span class="badge ${cls}">${esc(effect)}</span>`;
}
export function table(headers, rows, empty = "nothing to show") {
    if (rows.length === 0) {
        return `<p class="empty">${esc(empty)}</p>`;
    }
    const head = headers.map((h) => `<th>${esc(h)}</th>`).join("");
    const body = rows
        .map((row) => `<tr>${row.map((cell) => `<td>${cell}</td>`).join("")}</tr>`)
        .join("");
    return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}
export function timestamp(seconds) {
    if (seconds === null || seconds === undefined)
        return "—";
    return new Date(seconds * 1000).toISOString().replace("T", " ").slice(0, 19);
}
export function fraction(value) {
    if (value === null || value === undefined)
        return "—";
    return value.toFixed(3);
}
export function errorBox(code, message, detail = null) {
    const extra = detail ? `<div class="error-detail">${esc(detail)}</div>` : "";
    return `<div class="error-box" data-code="${esc(code)}">` +
        `<strong>${esc(code)}</strong> ${esc(message)}${extra}</div>`;
}
export function offlineBanner() {
    return `<div class="banner-offline" id="offline-banner">` +
        `API unreachable — read-only view of the last known state</div>`;
}
