import { afterEach, describe, expect, it, vi } from "vitest";

import { VigilClient } from "../../src/api.js";
import { mountOnboarding } from "../../src/onboarding.js";
import type { UvPreview } from "../../src/types.js";

const SIGNALS = [
  {
    signal_id: "sig-1",
    name: "api latency",
    query_expr: "api_latency{}",
    created_at: 0,
    last_snapshot_at: 1000,
    last_snapshot_short: false,
  },
];

function preview(flagged: number): UvPreview {
  const n = 20;
  return {
    kind: "univariate",
    signal_id: "sig-1",
    timestamps: Array.from({ length: n }, (_, i) => i * 60_000),
    original: Array.from({ length: n }, () => 1),
    predicted: Array.from({ length: n }, () => 1),
    flagged: Array.from({ length: n }, (_, i) => i < flagged),
    flagged_count: flagged,
  };
}

interface Call {
  method: string;
  path: string;
  body: Record<string, unknown> | undefined;
}

function installFetch(onPreview: (body: Record<string, unknown>) => UvPreview): Call[] {
  const calls: Call[] = [];
  vi.stubGlobal("fetch", async (url: string, init: RequestInit = {}) => {
    const method = init.method ?? "GET";
    const path = new URL(String(url)).pathname;
    const body = init.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path, body });

    let payload: unknown = {};
    if (path === "/healthz") payload = { status: "ok", node_id: "n", now_ms: 10_000_000 };
    else if (path === "/v1/signals" && method === "GET") payload = { signals: SIGNALS };
    else if (path === "/v1/query_range") payload = { results: [] };
    else if (path === "/v1/models/preview") {
      payload = {
        artifact_ref: "ref",
        mode: "preview",
        trained_rows: 100,
        train_start_ts: 0,
        train_end_ts: 1,
        preview: onPreview(body),
      };
    } else if (path === "/v1/models/train") {
      payload = {
        artifact_ref: "ref",
        mode: "full",
        trained_rows: 100,
        train_start_ts: 0,
        train_end_ts: 1,
        preview: onPreview(body),
        model: { model_id: "m-1", version: 1 },
      };
    }
    return new Response(JSON.stringify(payload), {
      status: path === "/v1/models/train" && method === "POST" ? 201 : 200,
      headers: { "content-type": "application/json" },
    });
  });
  return calls;
}

function deployButton(root: HTMLElement): HTMLButtonElement {
  return root.querySelector<HTMLButtonElement>('[data-action="deploy"]')!;
}

async function settle(): Promise<void> {
  await new Promise((r) => setTimeout(r, 0));
  await new Promise((r) => setTimeout(r, 0));
}

afterEach(() => {
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
});

describe("onboarding flow", () => {
  it("keeps deploy disabled until a preview succeeds", async () => {
    installFetch(() => preview(3));
    const root = document.createElement("div");
    document.body.appendChild(root);
    mountOnboarding(root, new VigilClient("http://svc"));
    await settle();

    expect(deployButton(root).disabled).toBe(true);

    root.querySelector<HTMLInputElement>('input[name="signal"]')!.click();
    await settle();
    expect(deployButton(root).disabled).toBe(true);

    root.querySelector<HTMLButtonElement>('[data-action="preview"]')!.click();
    await settle();
    expect(deployButton(root).disabled).toBe(false);
    expect(root.querySelector('[data-role="flag-count"]')!.textContent).toContain("3 points");
  });

  it("sends the edited thresholds on re-preview and marks the old preview stale", async () => {
    const calls = installFetch((body) => {
      const spec = body.detector_spec as Record<string, unknown>;
      return preview(spec.spike_threshold === 4 ? 1 : 5);
    });
    const root = document.createElement("div");
    document.body.appendChild(root);
    mountOnboarding(root, new VigilClient("http://svc"));
    await settle();

    root.querySelector<HTMLInputElement>('input[name="signal"]')!.click();
    await settle();
    root.querySelector<HTMLButtonElement>('[data-action="preview"]')!.click();
    await settle();
    expect(root.querySelector('[data-role="flag-count"]')!.textContent).toContain("5 points");

    const spike = root.querySelector<HTMLInputElement>('[data-spec="spike_threshold"]')!;
    spike.value = "4";
    spike.dispatchEvent(new Event("change", { bubbles: true }));
    await settle();

    // stale preview: flags shown with a warning, deploy gated again
    expect(root.querySelector('[data-role="flag-count"]')!.textContent).toContain(
      "settings changed",
    );
    expect(deployButton(root).disabled).toBe(true);

    root.querySelector<HTMLButtonElement>('[data-action="preview"]')!.click();
    await settle();

    const previews = calls.filter((c) => c.path === "/v1/models/preview");
    expect(previews.length).toBe(2);
    const sentSpec = previews[1].body!.detector_spec as Record<string, unknown>;
    expect(sentSpec.spike_threshold).toBe(4);
    expect(root.querySelector('[data-role="flag-count"]')!.textContent).toContain("1 point");
    expect(deployButton(root).disabled).toBe(false);
  });

  it("deploys with register and reports the new model id", async () => {
    const calls = installFetch(() => preview(2));
    const root = document.createElement("div");
    document.body.appendChild(root);
    mountOnboarding(root, new VigilClient("http://svc"));
    await settle();

    root.querySelector<HTMLInputElement>('input[name="signal"]')!.click();
    await settle();
    root.querySelector<HTMLButtonElement>('[data-action="preview"]')!.click();
    await settle();
    deployButton(root).click();
    await settle();

    const train = calls.find((c) => c.path === "/v1/models/train");
    expect(train).toBeDefined();
    expect(train!.body!.register).toBe(true);
    expect(train!.body!.model_type).toBe("arima_uv");
    expect(root.querySelector('[data-role="deployed"]')!.textContent).toContain("m-1");
  });

  it("shows the error envelope inline when a preview is refused", async () => {
    vi.stubGlobal("fetch", async (url: string, init: RequestInit = {}) => {
      const path = new URL(String(url)).pathname;
      const method = init.method ?? "GET";
      let payload: unknown = {};
      let status = 200;
      if (path === "/healthz") payload = { status: "ok", node_id: "n", now_ms: 0 };
      else if (path === "/v1/signals" && method === "GET") payload = { signals: SIGNALS };
      else if (path === "/v1/query_range") payload = { results: [] };
      else if (path === "/v1/models/preview") {
        status = 422;
        payload = {
          code: "insufficient_data",
          message: "snapshot shorter than one period",
          details: {},
        };
      }
      return new Response(JSON.stringify(payload), { status });
    });
    const root = document.createElement("div");
    document.body.appendChild(root);
    mountOnboarding(root, new VigilClient("http://svc"));
    await settle();

    root.querySelector<HTMLInputElement>('input[name="signal"]')!.click();
    await settle();
    root.querySelector<HTMLButtonElement>('[data-action="preview"]')!.click();
    await settle();

    const banner = root.querySelector(".error-banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("insufficient_data");
    expect(deployButton(root).disabled).toBe(true);
  });

  it("exposes only sensitivity and hold controls for signal groups outside the expert panel", async () => {
    installFetch(() => preview(0));
    const root = document.createElement("div");
    document.body.appendChild(root);
    mountOnboarding(root, new VigilClient("http://svc"));
    await settle();

    root.querySelector<HTMLInputElement>('input[name="flow"][value="multivariate"]')!.click();
    await settle();

    const controls = root.querySelector(".controls")!;
    const plain = [...controls.querySelectorAll("[data-spec]")].filter(
      (n) => n.closest("details.expert") === null,
    );
    const fields = plain.map((n) => (n as HTMLElement).dataset.spec).sort();
    expect(fields).toEqual(["hold_tolerance", "hold_window", "sensitivity"]);
  });
});
