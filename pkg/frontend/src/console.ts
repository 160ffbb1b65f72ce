/** Ops console: triage the alert feed, review retrain proposals. */

import { ApiError, VigilClient } from "./api.js";
import { renderPreviewChart } from "./chart.js";
import type { AlertRecord, Preview, Proposal } from "./types.js";

export interface ConsoleState {
  alerts: AlertRecord[];
  proposals: Proposal[];
  /** alert ids whose feedback the server has refused or already recorded */
  locked: Set<string>;
  expanded: string | null;
  prePreview: Preview | null;
  postPreview: Preview | null;
  serverOffsetMs: number;
  busy: boolean;
  error: string | null;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmtTs(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19);
}

export function formatCountdown(remainingMs: number): string {
  if (remainingMs <= 0) return "auto-apply due";
  const total = Math.floor(remainingMs / 1000);
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  return `auto-applies in ${String(h).padStart(2, "0")}:${String(m).padStart(2, "0")}:${String(s).padStart(2, "0")}`;
}

function alertRow(alert: AlertRecord, locked: boolean): string {
  const fb = alert.feedback;
  const done = locked || fb !== null;
  const dis = done ? "disabled" : "";
  const badge = fb
    ? `<span class="badge feedback">${escapeHtml(fb.outcome)} by ${escapeHtml(fb.by)}</span>`
    : locked
      ? `<span class="badge feedback">feedback recorded</span>`
      : "";
  const snoozed =
    alert.snoozed_until !== null
      ? `<span class="badge snooze">snoozed until ${fmtTs(alert.snoozed_until)}</span>`
      : "";
  return `
    <tr class="alert-row" data-alert="${alert.alert_id}">
      <td><span class="chip severity-${alert.severity}">${alert.severity}</span></td>
      <td>${escapeHtml(alert.model_id)} v${alert.version}</td>
      <td>${fmtTs(alert.fired_at)}</td>
      <td>${escapeHtml(String(alert.verdict.triggered_by ?? ""))}</td>
      <td>${badge} ${snoozed}</td>
      <td class="alert-actions">
        <button data-action="tp" data-alert="${alert.alert_id}" ${dis}>True positive</button>
        <button data-action="fp" data-alert="${alert.alert_id}" ${dis}>False positive</button>
        <button data-action="snooze" data-alert="${alert.alert_id}">Snooze</button>
        <button data-action="delete" data-alert="${alert.alert_id}">Delete</button>
      </td>
    </tr>`;
}

function specUpdatesTable(proposal: Proposal): string {
  const entries = Object.entries(proposal.spec_updates);
  if (entries.length === 0 && proposal.boundary_scale === 1.0) {
    return `<p class="muted">no settings change, boundary recalibration only</p>`;
  }
  const rows = entries
    .map(([k, v]) => `<tr><td>${escapeHtml(k)}</td><td>${escapeHtml(String(v))}</td></tr>`)
    .join("");
  const scale =
    proposal.boundary_scale !== 1.0
      ? `<tr><td>boundary scale</td><td>x${proposal.boundary_scale.toFixed(2)}</td></tr>`
      : "";
  return `<table class="spec-updates"><thead><tr><th>setting</th><th>proposed</th></tr></thead>
          <tbody>${rows}${scale}</tbody></table>`;
}

function proposalCard(p: Proposal, expanded: boolean, nowMs: number): string {
  const verdict = (p.report && (p.report.verdict as string)) || "unknown";
  const pending = p.status === "pending";
  const countdown = pending
    ? `<span class="countdown" data-role="countdown" data-expires="${p.expires_at}">
         ${formatCountdown(p.expires_at - nowMs)}
       </span>`
    : "";
  return `
    <div class="proposal-card ${expanded ? "expanded" : ""}" data-proposal="${p.proposal_id}">
      <div class="proposal-head">
        <strong>${escapeHtml(p.model_id)}</strong>
        <span class="muted">v${p.old_version} to v${p.candidate_version}</span>
        <span class="chip verdict-${escapeHtml(verdict)}">${escapeHtml(verdict)}</span>
        <span class="chip status-${p.status}" data-role="status">${p.status}</span>
        ${countdown}
      </div>
      ${specUpdatesTable(p)}
      <div class="proposal-actions">
        <button data-action="expand" data-proposal="${p.proposal_id}">
          ${expanded ? "Hide comparison" : "Compare previews"}
        </button>
        <button data-action="approve" data-proposal="${p.proposal_id}" ${pending ? "" : "disabled"}>
          Approve
        </button>
        <button data-action="reject" data-proposal="${p.proposal_id}" ${pending ? "" : "disabled"}>
          Reject
        </button>
      </div>
      ${
        expanded
          ? `<div class="compare">
               <div><h4>Current (v${p.old_version})</h4><div data-role="pre-chart"></div></div>
               <div><h4>Proposed</h4><div data-role="post-chart"></div></div>
             </div>`
          : ""
      }
    </div>`;
}

export function renderConsole(state: ConsoleState, nowMs: number): string {
  const alertRows = state.alerts.map((a) => alertRow(a, state.locked.has(a.alert_id))).join("");
  const proposals = state.proposals
    .map((p) => proposalCard(p, state.expanded === p.proposal_id, nowMs))
    .join("");
  return `
    <section class="console">
      ${state.error ? `<div class="error-banner" role="alert">${escapeHtml(state.error)}</div>` : ""}
      <h2>Alerts</h2>
      ${
        state.alerts.length === 0
          ? `<p class="muted">No alerts.</p>`
          : `<table class="alert-table">
               <thead><tr><th>severity</th><th>model</th><th>fired</th><th>trigger</th>
                          <th></th><th>actions</th></tr></thead>
               <tbody>${alertRows}</tbody>
             </table>`
      }
      <h2>Retrain proposals</h2>
      ${proposals || `<p class="muted">No pending proposals.</p>`}
    </section>`;
}

export function mountConsole(root: HTMLElement, client: VigilClient) {
  const state: ConsoleState = {
    alerts: [],
    proposals: [],
    locked: new Set(),
    expanded: null,
    prePreview: null,
    postPreview: null,
    serverOffsetMs: 0,
    busy: false,
    error: null,
  };
  let ticker: ReturnType<typeof setInterval> | null = null;

  function serverNow(): number {
    return Date.now() + state.serverOffsetMs;
  }

  function redraw(): void {
    root.innerHTML = renderConsole(state, serverNow());
    if (state.expanded) {
      const card = root.querySelector(`[data-proposal="${state.expanded}"]`);
      const pre = card?.querySelector<HTMLElement>('[data-role="pre-chart"]');
      const post = card?.querySelector<HTMLElement>('[data-role="post-chart"]');
      if (pre && state.prePreview) pre.replaceChildren(renderPreviewChart(state.prePreview));
      if (post && state.postPreview) post.replaceChildren(renderPreviewChart(state.postPreview));
    }
    bind();
  }

  function tickCountdowns(): void {
    const now = serverNow();
    root.querySelectorAll<HTMLElement>('[data-role="countdown"]').forEach((node) => {
      node.textContent = formatCountdown(Number(node.dataset.expires) - now);
    });
  }

  async function run(task: () => Promise<void>): Promise<void> {
    state.busy = true;
    state.error = null;
    try {
      await task();
    } catch (err) {
      state.error = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    } finally {
      state.busy = false;
      redraw();
    }
  }

  async function sendFeedback(alertId: string, outcome: string): Promise<void> {
    await run(async () => {
      try {
        await client.sendFeedback(alertId, outcome);
      } catch (err) {
        // a second opinion on the same alert is refused; freeze the buttons
        if (err instanceof ApiError && err.status === 409) {
          state.locked.add(alertId);
          state.error = "feedback already recorded for this alert";
          return;
        }
        throw err;
      }
      state.alerts = await client.listAlerts();
    });
  }

  async function loadComparison(p: Proposal): Promise<void> {
    const [pre, post] = await Promise.all([
      client.previewModel(p.model_id, { version: p.old_version }),
      client.previewModel(p.model_id, {
        version: p.old_version,
        spec_updates: p.spec_updates as Record<string, unknown>,
      }),
    ]);
    state.prePreview = pre.preview;
    state.postPreview = post.preview;
  }

  function bind(): void {
    root.querySelectorAll<HTMLButtonElement>("[data-action]").forEach((btn) => {
      const action = btn.dataset.action;
      const alertId = btn.dataset.alert;
      const proposalId = btn.dataset.proposal;
      btn.addEventListener("click", () => {
        if (action === "tp" && alertId) void sendFeedback(alertId, "true_positive");
        else if (action === "fp" && alertId) void sendFeedback(alertId, "false_positive");
        else if (action === "snooze" && alertId) {
          void run(async () => {
            await client.snoozeAlert(alertId);
            state.alerts = await client.listAlerts();
          });
        } else if (action === "delete" && alertId) {
          void run(async () => {
            await client.deleteAlert(alertId);
            state.alerts = await client.listAlerts();
          });
        } else if (action === "expand" && proposalId) {
          void run(async () => {
            if (state.expanded === proposalId) {
              state.expanded = null;
              state.prePreview = null;
              state.postPreview = null;
              return;
            }
            const p = state.proposals.find((x) => x.proposal_id === proposalId);
            if (!p) return;
            state.expanded = proposalId;
            await loadComparison(p);
          });
        } else if (action === "approve" && proposalId) {
          void run(async () => {
            await client.approveProposal(proposalId);
            state.proposals = await client.listProposals();
          });
        } else if (action === "reject" && proposalId) {
          void run(async () => {
            await client.rejectProposal(proposalId);
            state.proposals = await client.listProposals();
          });
        }
      });
    });
  }

  async function load(): Promise<void> {
    await run(async () => {
      const health = await client.health();
      state.serverOffsetMs = health.now_ms - Date.now();
      state.alerts = await client.listAlerts();
      state.proposals = await client.listProposals();
    });
  }

  function start(): void {
    if (ticker === null) ticker = setInterval(tickCountdowns, 1000);
  }

  function stop(): void {
    if (ticker !== null) {
      clearInterval(ticker);
      ticker = null;
    }
  }

  redraw();
  void load();
  start();
  return { state, redraw, refresh: load, stop };
}
