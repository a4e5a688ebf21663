/** Pure HTML-string builders shared by every view (kept DOM-free so the
 * test suite can assert on output without a browser). */

export function esc(value: unknown): string {
  return String(value ?? "")
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const STATE_CLASSES: Record<string, string> = {
  Requested: "badge-muted",
  Approved: "badge-info",
  Provisioned: "badge-info",
  Active: "badge-ok",
  Suspended: "badge-warn",
  Decommissioned: "badge-dead",
};

export function stateBadge(state: string): string {
  const cls = STATE_CLASSES[state] ?? "badge-muted";
  return `<span class="badge ${cls}" data-state="${esc(state)}">${esc(state)}</span>`;
}

export function effectBadge(effect: string): string {
  const cls = effect === "allow" ? "badge-ok"
    : effect === "deny" ? "badge-dead" : "badge-warn";
  return `<span class="badge ${cls}">${esc(effect)}</span>`;
}

export function table(headers: string[], rows: string[][],
                      empty = "nothing to show"): string {
  if (rows.length === 0) {
    return `<p class="empty">${esc(empty)}</p>`;
  }
  const head = headers.map((h) => `<th>${esc(h)}</th>`).join("");
  const body = rows
    .map((row) => `<tr>${row.map((cell) => `<td>${cell}</td>`).join("")}</tr>`)
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function timestamp(seconds: number | null): string {
  if (seconds === null || seconds === undefined) return "—";
  return new Date(seconds * 1000).toISOString().replace("T", " ").slice(0, 19);
}

export function fraction(value: number | null): string {
  if (value === null || value === undefined) return "—";
  return value.toFixed(3);
}

export function errorBox(code: string, message: string,
                         detail: string | null = null): string {
  const extra = detail ? `<div class="error-detail">${esc(detail)}</div>` : "";
  return `<div class="error-box" data-code="${esc(code)}">` +
    `<strong>${esc(code)}</strong> ${esc(message)}${extra}</div>`;
}

export function offlineBanner(): string {
  return `<div class="banner-offline" id="offline-banner">` +
    `API unreachable — read-only view of the last known state</div>`;
}
