/** Signal onboarding wizard: pick signals, tune a detector, preview, deploy. */

import { ApiError, VigilClient } from "./api.js";
import { renderPreviewChart, renderRangeChart } from "./chart.js";
import type {
  DetectorSpecDto,
  Preview,
  SignalRecord,
  TrainRequestBody,
} from "./types.js";

export interface OnboardingState {
  signals: SignalRecord[];
  selected: string[];
  flow: "univariate" | "multivariate";
  spec: Partial<DetectorSpecDto>;
  preview: Preview | null;
  previewStale: boolean;
  busy: boolean;
  error: string | null;
  deployedModelId: string | null;
}

function initialSpec(flow: "univariate" | "multivariate"): Partial<DetectorSpecDto> {
  if (flow === "univariate") {
    return { flow, hold_window: 5, hold_tolerance: 1, smoothing_alpha: 1.0 };
  }
  return { flow, hold_window: 5, hold_tolerance: 1, smoothing_alpha: 1.0, sensitivity: 1.0 };
}

function numberOrUndefined(raw: string): number | undefined {
  const trimmed = raw.trim();
  if (trimmed === "") return undefined;
  const v = Number(trimmed);
  return Number.isFinite(v) ? v : undefined;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderSignalList(state: OnboardingState): string {
  if (state.signals.length === 0) {
    return `<p class="muted">No signals registered yet. Create one below.</p>`;
  }
  const multiple = state.flow === "multivariate";
  const rows = state.signals
    .map((s) => {
      const checked = state.selected.includes(s.signal_id) ? "checked" : "";
      const type = multiple ? "checkbox" : "radio";
      return `
        <label class="signal-row">
          <input type="${type}" name="signal" value="${s.signal_id}" ${checked}
                 data-action="select-signal">
          <span class="signal-name">${escapeHtml(s.name)}</span>
          <code class="signal-expr">${escapeHtml(s.query_expr)}</code>
          ${s.last_snapshot_at === null ? `<span class="badge warn">no snapshot</span>` : ""}
        </label>`;
    })
    .join("");
  return `<div class="signal-list">${rows}</div>`;
}

function renderControls(state: OnboardingState): string {
  const spec = state.spec;
  const hold = `
    <label>Hold window
      <input type="number" min="1" step="1" value="${spec.hold_window ?? 5}"
             data-spec="hold_window">
    </label>
    <label>Hold tolerance
      <input type="number" min="0" step="1" value="${spec.hold_tolerance ?? 1}"
             data-spec="hold_tolerance">
    </label>`;

  if (state.flow === "univariate") {
    return `
      <div class="controls">
        <label>Spike threshold
          <input type="number" step="any" value="${spec.spike_threshold ?? ""}"
                 placeholder="auto" data-spec="spike_threshold">
        </label>
        <label>Drop threshold
          <input type="number" step="any" value="${spec.drop_threshold ?? ""}"
                 placeholder="auto" data-spec="drop_threshold">
        </label>
        ${hold}
        <details class="expert">
          <summary>Expert settings</summary>
          <label>Smoothing alpha
            <input type="number" min="0.01" max="1" step="0.01"
                   value="${spec.smoothing_alpha ?? 1.0}" data-spec="smoothing_alpha">
          </label>
          <label>Seasonality period (steps)
            <input type="number" min="2" step="1" value="${spec.seasonality_period ?? ""}"
                   placeholder="none" data-spec="seasonality_period">
          </label>
          <label>Static upper bound
            <input type="number" step="any" value="${spec.static_upper ?? ""}"
                   placeholder="none" data-spec="static_upper">
          </label>
          <label>Static lower bound
            <input type="number" step="any" value="${spec.static_lower ?? ""}"
                   placeholder="none" data-spec="static_lower">
          </label>
        </details>
      </div>`;
  }

  // the multivariate form deliberately exposes just sensitivity and hold;
  // everything else hides behind the expert disclosure
  return `
    <div class="controls">
      <label>Sensitivity
        <input type="range" min="0.05" max="1" step="0.05"
               value="${spec.sensitivity ?? 1.0}" data-spec="sensitivity">
        <span class="value-readout">${(spec.sensitivity ?? 1.0).toFixed(2)}</span>
      </label>
      ${hold}
      <details class="expert">
        <summary>Expert settings</summary>
        <label>Smoothing alpha
          <input type="number" min="0.01" max="1" step="0.01"
                 value="${spec.smoothing_alpha ?? 1.0}" data-spec="smoothing_alpha">
        </label>
      </details>
    </div>`;
}

export function renderOnboarding(state: OnboardingState): string {
  const previewReady = state.preview !== null && !state.previewStale;
  const deployDisabled = !previewReady || state.busy || state.selected.length === 0;
  const flagged =
    state.preview === null
      ? ""
      : `<p class="flag-count" data-role="flag-count">
           ${state.preview.flagged_count} point${state.preview.flagged_count === 1 ? "" : "s"} flagged
           ${state.previewStale ? `<span class="badge warn">settings changed, preview again</span>` : ""}
         </p>`;
  return `
    <section class="onboarding">
      <h2>Onboard a signal</h2>
      <div class="flow-picker">
        <label><input type="radio" name="flow" value="univariate"
          ${state.flow === "univariate" ? "checked" : ""} data-action="set-flow"> Single signal</label>
        <label><input type="radio" name="flow" value="multivariate"
          ${state.flow === "multivariate" ? "checked" : ""} data-action="set-flow"> Signal group</label>
      </div>
      ${renderSignalList(state)}
      <form class="new-signal" data-action="create-signal">
        <input name="name" placeholder="signal name" required>
        <input name="query_expr" placeholder='selector, e.g. api_latency{region="eu"}' required>
        <button type="submit" ${state.busy ? "disabled" : ""}>Register signal</button>
      </form>
      <div class="chart-slot" data-role="range-chart"></div>
      ${renderControls(state)}
      ${state.error ? `<div class="error-banner" role="alert">${escapeHtml(state.error)}</div>` : ""}
      <div class="actions">
        <button data-action="snapshot" ${state.busy || state.selected.length === 0 ? "disabled" : ""}>
          Snapshot
        </button>
        <button data-action="preview" ${state.busy || state.selected.length === 0 ? "disabled" : ""}>
          Preview
        </button>
        <button data-action="deploy" ${deployDisabled ? "disabled" : ""}>
          Deploy model
        </button>
      </div>
      ${flagged}
      <div class="chart-slot" data-role="preview-chart"></div>
      ${
        state.deployedModelId
          ? `<p class="deployed" data-role="deployed">Deployed as <code>${state.deployedModelId}</code></p>`
          : ""
      }
    </section>`;
}

/** Wire the onboarding section into a container and return its controller. */
export function mountOnboarding(root: HTMLElement, client: VigilClient) {
  const state: OnboardingState = {
    signals: [],
    selected: [],
    flow: "univariate",
    spec: initialSpec("univariate"),
    preview: null,
    previewStale: false,
    busy: false,
    error: null,
    deployedModelId: null,
  };

  function trainBody(): TrainRequestBody {
    return {
      model_type: state.flow === "univariate" ? "arima_uv" : "iforest_mv",
      signal_ids: [...state.selected],
      detector_spec: { ...state.spec, flow: state.flow },
    };
  }

  function redraw(): void {
    root.innerHTML = renderOnboarding(state);
    const slot = root.querySelector<HTMLElement>('[data-role="preview-chart"]');
    if (slot && state.preview) {
      slot.replaceChildren(renderPreviewChart(state.preview));
    }
    bind();
  }

  async function drawRange(): Promise<void> {
    const slot = root.querySelector<HTMLElement>('[data-role="range-chart"]');
    if (!slot || state.selected.length === 0) return;
    try {
      const { now_ms } = await client.health();
      const start = now_ms - 24 * 3_600_000;
      const series: { label: string; values: number[] }[] = [];
      let timestamps: number[] = [];
      for (const id of state.selected) {
        const signal = state.signals.find((s) => s.signal_id === id);
        if (!signal) continue;
        const results = await client.queryRange(signal.query_expr, start, now_ms, 60_000);
        for (const r of results) {
          if (timestamps.length === 0) timestamps = r.timestamps;
          series.push({ label: signal.name, values: r.values });
        }
      }
      slot.replaceChildren(renderRangeChart(timestamps, series));
    } catch {
      // raw range view is best-effort; preview still works off snapshots
    }
  }

  async function run(task: () => Promise<void>): Promise<void> {
    state.busy = true;
    state.error = null;
    redraw();
    try {
      await task();
    } catch (err) {
      state.error = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    } finally {
      state.busy = false;
      redraw();
    }
  }

  function readSpecInput(input: HTMLInputElement): void {
    const field = input.dataset.spec as keyof DetectorSpecDto;
    const value = numberOrUndefined(input.value);
    const next: Record<string, unknown> = { ...state.spec };
    if (value === undefined) delete next[field];
    else next[field] = value;
    state.spec = next as Partial<DetectorSpecDto>;
    state.previewStale = state.preview !== null;
  }

  function bind(): void {
    root.querySelectorAll<HTMLInputElement>('[data-action="set-flow"]').forEach((input) => {
      input.addEventListener("change", () => {
        state.flow = input.value as OnboardingState["flow"];
        state.spec = initialSpec(state.flow);
        state.selected = [];
        state.preview = null;
        state.previewStale = false;
        state.deployedModelId = null;
        redraw();
      });
    });

    root.querySelectorAll<HTMLInputElement>('[data-action="select-signal"]').forEach((input) => {
      input.addEventListener("change", () => {
        if (state.flow === "univariate") {
          state.selected = input.checked ? [input.value] : [];
        } else if (input.checked) {
          if (!state.selected.includes(input.value)) state.selected.push(input.value);
        } else {
          state.selected = state.selected.filter((id) => id !== input.value);
        }
        state.preview = null;
        state.previewStale = false;
        redraw();
        void drawRange();
      });
    });

    root.querySelectorAll<HTMLInputElement>("[data-spec]").forEach((input) => {
      input.addEventListener("change", () => {
        readSpecInput(input);
        redraw();
      });
    });

    const form = root.querySelector<HTMLFormElement>('[data-action="create-signal"]');
    form?.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      void run(async () => {
        await client.createSignal(
          String(data.get("name") ?? ""),
          String(data.get("query_expr") ?? ""),
        );
        state.signals = await client.listSignals();
      });
    });

    root.querySelector('[data-action="snapshot"]')?.addEventListener("click", () => {
      void run(async () => {
        for (const id of state.selected) {
          await client.snapshotSignal(id);
        }
        state.signals = await client.listSignals();
      });
    });

    root.querySelector('[data-action="preview"]')?.addEventListener("click", () => {
      void run(async () => {
        const resp = await client.previewTrain(trainBody());
        state.preview = resp.preview;
        state.previewStale = false;
      });
    });

    root.querySelector('[data-action="deploy"]')?.addEventListener("click", () => {
      void run(async () => {
        const resp = await client.train(trainBody());
        state.deployedModelId = resp.model?.model_id ?? null;
      });
    });
  }

  async function load(): Promise<void> {
    await run(async () => {
      state.signals = await client.listSignals();
    });
  }

  redraw();
  void load();
  return { state, redraw, refresh: load };
}
