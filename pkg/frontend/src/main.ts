/** Console bootstrap: session form, tab navigation, poll loop, and one
 * delegated click handler that maps data-action buttons to API calls.
 * Every state change the screen shows comes from a re-fetch, never from
 * optimistic local edits. */

import { ApiClient, ApiError, type Session } from "./api.js";
import { errorBox, esc, offlineBanner } from "./render.js";
import { Store } from "./state.js";
import { renderAgentDetail } from "./views/agent.js";
import { renderAudit } from "./views/audit.js";
import { renderFleet } from "./views/fleet.js";
import { renderKpis } from "./views/kpis.js";
import { renderPending } from "./views/pending.js";

type Tab = "fleet" | "pending" | "kpis" | "audit" | "agent";

interface UiState {
  tab: Tab;
  detailAgent: string | null;
  flash: string;
}

const ui: UiState = { tab: "fleet", detailAgent: null, flash: "" };
let store: Store | null = null;
let timer: number | undefined;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function flash(html: string): void {
  ui.flash = html;
  el("flash").innerHTML = html;
}

async function render(): Promise<void> {
  if (!store) return;
  const snapshot = store.snapshot;
  el("offline-slot").innerHTML = store.offline ? offlineBanner() : "";
  document.querySelectorAll("nav button").forEach((button) => {
    button.classList.toggle("active",
      (button as HTMLElement).dataset.tab === ui.tab);
  });
  if (!snapshot) {
    el("main").innerHTML = `<p class="empty">loading…</p>`;
    return;
  }
  const main = el("main");
  if (ui.tab === "fleet") {
    main.innerHTML = renderFleet(snapshot);
  } else if (ui.tab === "pending") {
    main.innerHTML = renderPending(snapshot.pending);
  } else if (ui.tab === "kpis") {
    main.innerHTML = snapshot.kpi && snapshot.maturity
      ? renderKpis(snapshot.kpi, snapshot.maturity)
      : `<p class="empty">no audit history yet</p>`;
  } else if (ui.tab === "audit") {
    main.innerHTML = renderAudit(snapshot.audit, snapshot.chain, store.auditFilter);
  } else if (ui.tab === "agent" && ui.detailAgent) {
    try {
      const detail = await store.client.agentDetail(ui.detailAgent);
      main.innerHTML = renderAgentDetail(detail);
    } catch (error) {
      main.innerHTML = describeError(error);
    }
  }
  el("pending-count").textContent = String(
    snapshot.pending.requests.length + snapshot.pending.cases.length);
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return errorBox(error.code, error.message, error.detail);
  }
  return errorBox("console_error", String(error));
}

async function refreshAndRender(): Promise<void> {
  if (!store) return;
  try {
    await store.refresh();
  } catch (error) {
    flash(describeError(error));
  }
  await render();
}

async function runAction(run: () => Promise<string>): Promise<void> {
  try {
    const message = await run();
    flash(`<div class="flash-ok">${esc(message)}</div>`);
  } catch (error) {
    flash(describeError(error));
  }
  await refreshAndRender();   // the service is the source of truth
}

function approveDialog(agentId: string): void {
  const dialog = el<HTMLDialogElement>("approve-dialog");
  (dialog.querySelector("[name=agent_id]") as HTMLInputElement).value = agentId;
  dialog.showModal();
}

function wireApproveDialog(): void {
  const dialog = el<HTMLDialogElement>("approve-dialog");
  dialog.querySelector("form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.target as HTMLFormElement;
    const value = (name: string) =>
      (form.querySelector(`[name=${name}]`) as HTMLInputElement).value;
    dialog.close();
    void runAction(async () => {
      const agent = await store!.client.approveAgent(value("agent_id"), {
        owner: value("owner"),
        liability: value("liability") || null,
        expiresInDays: parseInt(value("expires_days"), 10),
        modelId: value("model_id"),
        promptHashHex: value("prompt_hash"),
        configHashHex: value("config_hash"),
        policyVersion: parseInt(value("policy_version"), 10),
      });
      return `approved ${agent.agent_id}; state ${agent.state}`;
    });
  });
  dialog.querySelector("[data-action=cancel-dialog]")!
    .addEventListener("click", () => dialog.close());
}

function onClick(event: Event): void {
  const target = (event.target as HTMLElement).closest("[data-action]");
  if (!target || !store) return;
  const action = (target as HTMLElement).dataset.action!;
  const agentId = (target as HTMLElement).dataset.agent ?? "";
  event.preventDefault();

  if (action === "detail") {
    ui.tab = "agent";
    ui.detailAgent = agentId;
    void render();
  } else if (action === "back-to-fleet") {
    ui.tab = "fleet";
    void render();
  } else if (action === "approve") {
    approveDialog(agentId);
  } else if (action === "transition") {
    const lifecycleEvent = (target as HTMLElement).dataset.event!;
    void runAction(async () => {
      const state = await store!.client.transition(agentId, lifecycleEvent);
      return `${agentId}: ${lifecycleEvent} → ${state}`;
    });
  } else if (action === "kill") {
    // explicit confirmation is mandatory for containment actions
    const reason = window.prompt(
      `Fire the kill switch on ${agentId}?\n` +
      `This suspends the agent and revokes every credential.\n` +
      `Enter a reason to confirm:`);
    if (reason === null || reason.trim() === "") return;
    void runAction(async () => {
      const report = await store!.client.fireKillSwitch(agentId, reason, true);
      return `kill switch fired on ${report.agent_id}: ` +
        `${report.revoked_credentials} credential(s) revoked`;
    });
  } else if (action === "decommission") {
    const reason = window.prompt(
      `Decommission ${agentId}?\n` +
      `This is terminal: credentials revoked, memory frozen.\n` +
      `Enter a reason to confirm:`);
    if (reason === null || reason.trim() === "") return;
    if (!window.confirm(`Really decommission ${agentId}? This cannot be undone.`)) {
      return;
    }
    void runAction(async () => {
      const report = await store!.client.decommission(agentId, reason, true);
      return `decommissioned ${report.agent_id}: ` +
        `${report.revoked_credentials} credential(s) revoked, ` +
        `${report.frozen_entries} entries frozen`;
    });
  } else if (action === "verdict") {
    const targetId = (target as HTMLElement).dataset.target!;
    const verdict = (target as HTMLElement).dataset.verdict! as "allow" | "deny";
    const note = (document.querySelector(
      `[data-note-for="${targetId}"]`) as HTMLInputElement | null)?.value ?? "";
    void runAction(async () => {
      await store!.client.submitVerdict(targetId, verdict, note);
      return `${verdict} recorded for ${targetId}`;
    });
  } else if (action === "drift-check") {
    const form = el<HTMLFormElement>("drift-form");
    const value = (name: string) =>
      (form.querySelector(`[name=${name}]`) as HTMLInputElement).value;
    void (async () => {
      try {
        const result = await store!.client.checkDrift(agentId, {
          policy_version: parseInt(value("policy_version"), 10),
          model_id: value("model_id"),
          prompt_hash: value("prompt_hash"),
          config_hash: value("config_hash"),
        });
        el("drift-result").innerHTML = result.finding === null
          ? `<p class="flash-ok">observed configuration matches the baseline</p>`
          : `<p class="warn-text">drift recorded: ` +
            `${esc((result.finding as { dimensions: string[] }).dimensions.join(", "))}</p>`;
        await refreshAndRender();
      } catch (error) {
        el("drift-result").innerHTML = describeError(error);
      }
    })();
  } else if (action === "audit-filter") {
    const form = el<HTMLFormElement>("audit-filter");
    store.auditFilter = {
      kinds: (form.querySelector("[name=kinds]") as HTMLInputElement).value.trim(),
      agentId: (form.querySelector("[name=agent_id]") as HTMLInputElement).value.trim(),
    };
    void refreshAndRender();
  }
}

function startSession(session: Session): void {
  store = new Store(new ApiClient(session));
  el("session-form-wrap").style.display = "none";
  el("console-wrap").style.display = "block";
  el("operator-label").textContent = session.operator;
  if (timer !== undefined) window.clearInterval(timer);
  timer = window.setInterval(() => void refreshAndRender(),
                             session.refreshSeconds * 1000);
  void refreshAndRender();
}

function boot(): void {
  document.addEventListener("click", onClick);
  wireApproveDialog();
  document.querySelectorAll("nav button").forEach((button) => {
    button.addEventListener("click", () => {
      ui.tab = (button as HTMLElement).dataset.tab as Tab;
      void render();
    });
  });
  const form = el<HTMLFormElement>("session-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = (name: string) =>
      (form.querySelector(`[name=${name}]`) as HTMLInputElement).value;
    const operator = value("operator").trim();
    if (!operator) return;   // no action without an operator identity
    startSession({
      baseUrl: value("base_url").trim().replace(/\/$/, "") ||
        window.location.origin,
      operator,
      refreshSeconds: Math.max(1, parseInt(value("refresh"), 10) || 5),
    });
  });
}

document.addEventListener("DOMContentLoaded", boot);
