/** Wire types for the /v1 HTTP API. */

export interface ErrorEnvelope {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface Health {
  status: string;
  node_id: string;
  now_ms: number;
}

export interface SignalRecord {
  signal_id: string;
  name: string;
  query_expr: string;
  created_at: number;
  last_snapshot_at: number | null;
  last_snapshot_short: boolean;
}

export interface DetectorSpecDto {
  flow: "univariate" | "multivariate";
  model_ref?: [string, number] | null;
  static_upper?: number | null;
  static_lower?: number | null;
  hold_window: number;
  hold_tolerance: number;
  smoothing_alpha: number;
  seasonality_period?: number | null;
  spike_threshold?: number | null;
  drop_threshold?: number | null;
  sensitivity: number;
}

export interface ModelRecord {
  model_id: string;
  version: number;
  model_type: string;
  signal_ids: string[];
  detector_spec: DetectorSpecDto;
  artifact_ref: string;
  channel_ref: string | null;
  status: string;
  created_at: number;
}

export interface UvPreview {
  kind: "univariate";
  signal_id: string;
  timestamps: number[];
  original: number[];
  predicted: number[];
  flagged: boolean[];
  flagged_count: number;
}

export interface MvPreview {
  kind: "multivariate";
  signal_ids: string[];
  timestamps: number[];
  signals: Record<string, number[]>;
  scores: number[];
  score_boundary: number;
  flagged: boolean[];
  flagged_count: number;
}

export type Preview = UvPreview | MvPreview;

export interface TrainResponse {
  artifact_ref: string;
  mode: "full" | "preview";
  trained_rows: number;
  train_start_ts: number;
  train_end_ts: number;
  preview: Preview;
  model?: ModelRecord | null;
}

export interface ModelPreviewResponse extends TrainResponse {
  model_id: string;
  version: number;
  detector_spec: DetectorSpecDto;
}

export interface VerdictSummary {
  triggered_by: string | null;
  breach_count: number;
  anomaly_count: number;
  attribution?: { feature: string; contribution: number }[];
  [key: string]: unknown;
}

export interface AlertRecord {
  alert_id: string;
  model_id: string;
  version: number;
  fired_at: number;
  verdict: VerdictSummary;
  severity: "low" | "medium" | "high" | "critical";
  state: string;
  snoozed_until: number | null;
  feedback: { outcome: string; by: string; at: number } | null;
}

export interface Proposal {
  proposal_id: string;
  model_id: string;
  old_version: number;
  candidate_version: number;
  preview: Record<string, unknown>;
  created_at: number;
  expires_at: number;
  status: "pending" | "approved" | "rejected" | "auto_applied";
  spec_updates: Partial<DetectorSpecDto>;
  boundary_scale: number;
  artifact_ref: string | null;
  report: { verdict?: string; [key: string]: unknown };
}

export interface DriftReport {
  model_id: string;
  ks: number;
  psi: number;
  kl: number;
  js: number;
  wasserstein: number;
  daily_alert_count: number;
  verdict: string;
  evaluated_at: number;
}

export interface SnapshotMeta {
  signal_id: string;
  step_ms: number;
  start_ts: number;
  end_ts: number;
  rows: number;
  short: boolean;
}

export interface RangeResult {
  name: string;
  labels: Record<string, string>;
  timestamps: number[];
  values: number[];
}

export interface TrainRequestBody {
  model_type: string;
  signal_ids: string[];
  detector_spec?: Partial<DetectorSpecDto>;
  model_id?: string;
  channel_ref?: string;
  register?: boolean;
  seed?: number;
  params?: Record<string, unknown>;
}
