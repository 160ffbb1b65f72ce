import type {
  AlertRecord,
  DriftReport,
  ErrorEnvelope,
  Health,
  ModelPreviewResponse,
  ModelRecord,
  Preview,
  Proposal,
  RangeResult,
  SignalRecord,
  SnapshotMeta,
  TrainRequestBody,
  TrainResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.details = envelope.details ?? {};
  }
}

export interface RequestLogEntry {
  method: string;
  path: string;
  status: number;
  idempotencyKey: string | null;
  mutation: boolean;
}

const MUTATING = new Set(["POST", "PATCH", "PUT", "DELETE"]);

function newKey(): string {
  if (typeof crypto !== "undefined" && crypto.randomUUID) {
    return crypto.randomUUID();
  }
  // jsdom without crypto: timestamp plus counter is unique enough per session
  return `key-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

/**
 * Thin typed client for the detection service.
 *
 * Every mutating request carries a fresh Idempotency-Key, and mutations that
 * target the same entity are chained so they reach the server in the order
 * the user issued them. Reads go out immediately. All traffic lands in
 * `requestLog`, which end-to-end tests use to check that UI actions map
 * one-to-one onto API calls.
 */
export class VigilClient {
  readonly baseUrl: string;
  readonly requestLog: RequestLogEntry[] = [];
  private readonly token: string | null;
  private readonly tails = new Map<string, Promise<unknown>>();

  constructor(baseUrl: string, token: string | null = null) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    query?: Record<string, string | number | undefined>,
  ): Promise<T> {
    let url = this.baseUrl + path;
    if (query) {
      const qs = new URLSearchParams();
      for (const [k, v] of Object.entries(query)) {
        if (v !== undefined) qs.set(k, String(v));
      }
      const rendered = qs.toString();
      if (rendered) url += "?" + rendered;
    }
    const headers: Record<string, string> = { accept: "application/json" };
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    const mutation = MUTATING.has(method);
    let key: string | null = null;
    if (mutation) {
      key = newKey();
      headers["idempotency-key"] = key;
    }
    if (body !== undefined) headers["content-type"] = "application/json";

    const resp = await fetch(url, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    this.requestLog.push({
      method,
      path,
      status: resp.status,
      idempotencyKey: key,
      mutation,
    });
    if (resp.status === 204) return undefined as T;
    const text = await resp.text();
    const payload = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      const envelope: ErrorEnvelope =
        payload && typeof payload.code === "string"
          ? payload
          : { code: "http_error", message: `HTTP ${resp.status}`, details: {} };
      throw new ApiError(resp.status, envelope);
    }
    return payload as T;
  }

  /** Chain a mutation behind any in-flight mutation for the same entity. */
  private serialized<T>(entity: string, run: () => Promise<T>): Promise<T> {
    const prev = this.tails.get(entity) ?? Promise.resolve();
    const next = prev.then(run, run);
    this.tails.set(
      entity,
      next.catch(() => undefined),
    );
    return next;
  }

  health(): Promise<Health> {
    return this.request("GET", "/healthz");
  }

  listSignals(): Promise<SignalRecord[]> {
    return this.request<{ signals: SignalRecord[] }>("GET", "/v1/signals").then(
      (r) => r.signals,
    );
  }

  createSignal(name: string, queryExpr: string): Promise<SignalRecord> {
    return this.serialized("signals", () =>
      this.request("POST", "/v1/signals", { name, query_expr: queryExpr }),
    );
  }

  snapshotSignal(signalId: string): Promise<SnapshotMeta> {
    return this.serialized(`signal:${signalId}`, () =>
      this.request("POST", `/v1/signals/${signalId}/snapshot`),
    );
  }

  queryRange(
    selector: string,
    startMs: number,
    endMs: number,
    stepMs: number,
  ): Promise<RangeResult[]> {
    return this.request<{ results: RangeResult[] }>(
      "GET",
      "/v1/query_range",
      undefined,
      { selector, start_ms: startMs, end_ms: endMs, step_ms: stepMs },
    ).then((r) => r.results);
  }

  previewTrain(body: TrainRequestBody): Promise<TrainResponse> {
    return this.request("POST", "/v1/models/preview", body);
  }

  train(body: TrainRequestBody): Promise<TrainResponse> {
    return this.serialized("models", () =>
      this.request("POST", "/v1/models/train", { ...body, register: true }),
    );
  }

  listModels(): Promise<ModelRecord[]> {
    return this.request<{ models: ModelRecord[] }>("GET", "/v1/models").then(
      (r) => r.models,
    );
  }

  getModel(
    modelId: string,
  ): Promise<{ model: ModelRecord; versions: ModelRecord[] }> {
    return this.request("GET", `/v1/models/${modelId}`);
  }

  previewModel(
    modelId: string,
    opts: { version?: number; spec_updates?: Record<string, unknown> } = {},
  ): Promise<ModelPreviewResponse> {
    return this.request("POST", `/v1/models/${modelId}/preview`, opts);
  }

  listAlerts(opts: {
    modelId?: string;
    state?: string;
    sinceMs?: number;
  } = {}): Promise<AlertRecord[]> {
    return this.request<{ alerts: AlertRecord[] }>(
      "GET",
      "/v1/alerts",
      undefined,
      { model_id: opts.modelId, state: opts.state, since_ms: opts.sinceMs },
    ).then((r) => r.alerts);
  }

  sendFeedback(alertId: string, outcome: string): Promise<AlertRecord> {
    return this.serialized(`alert:${alertId}`, () =>
      this.request("POST", `/v1/alerts/${alertId}/feedback`, {
        outcome,
        by: "ui",
      }),
    );
  }

  snoozeAlert(alertId: string, untilMs?: number): Promise<AlertRecord> {
    return this.serialized(`alert:${alertId}`, () =>
      this.request("POST", `/v1/alerts/${alertId}/snooze`, {
        until_ms: untilMs,
      }),
    );
  }

  deleteAlert(alertId: string): Promise<AlertRecord> {
    return this.serialized(`alert:${alertId}`, () =>
      this.request("DELETE", `/v1/alerts/${alertId}`),
    );
  }

  listProposals(opts: {
    status?: string;
    modelId?: string;
  } = {}): Promise<Proposal[]> {
    return this.request<{ proposals: Proposal[] }>(
      "GET",
      "/v1/proposals",
      undefined,
      { status: opts.status, model_id: opts.modelId },
    ).then((r) => r.proposals);
  }

  getProposal(proposalId: string): Promise<Proposal> {
    return this.request("GET", `/v1/proposals/${proposalId}`);
  }

  approveProposal(
    proposalId: string,
  ): Promise<{ proposal_id: string; status: string }> {
    return this.serialized(`proposal:${proposalId}`, () =>
      this.request("POST", `/v1/proposals/${proposalId}/approve`),
    );
  }

  rejectProposal(
    proposalId: string,
  ): Promise<{ proposal_id: string; status: string }> {
    return this.serialized(`proposal:${proposalId}`, () =>
      this.request("POST", `/v1/proposals/${proposalId}/reject`),
    );
  }

  listDriftReports(modelId?: string): Promise<DriftReport[]> {
    return this.request<{ reports: DriftReport[] }>(
      "GET",
      "/v1/drift/reports",
      undefined,
      { model_id: modelId },
    ).then((r) => r.reports);
  }
}

export type { Preview };
