/**
 * Typed client for the workbench service.
 *
 * Every shape here mirrors the HTTP/JSON contract exactly; the console
 * performs no privacy math of its own. Numbers shown in the UI are
 * always copied out of these response payloads.
 */

// ---------------------------------------------------------------------------
// request and response shapes
// ---------------------------------------------------------------------------

export type SchemeName = "poisson" | "fixed-size";

export interface CalibrateRequest {
  epsilon: number;
  delta: number;
  scheme: SchemeName;
  batch_size: number;
  dataset_size: number;
  rounds: number;
  local_epochs?: number;
  adjacency?: string;
}

export interface CalibrateResponse {
  sigma: number;
  achieved_epsilon: number;
  best_order: number;
  steps: number;
  epsilon: number;
  delta: number;
  scheme: SchemeName;
  adjacency: string;
}

export type GoalKind = "mitigate-mia" | "mitigate-reconstruction" | "regulatory";

export interface RecommendRequest {
  goal: { kind: GoalKind; epsilon?: number };
  clients: number;
  dataset_size: number;
  rounds: number;
  model_units: number;
  memory_budget?: number;
  min_accuracy?: number;
  policy?: string;
  local_epochs?: number;
  preferred_accountant?: SchemeName;
}

export interface Recommendation {
  epsilon: number;
  accountant: SchemeName;
  batch_size: number;
  partition_sizes: number[];
  deltas: number[];
  sigmas: number[];
  steps_per_client: number[];
  memory_peak_estimate: number | null;
  overrun_probability: number | null;
  rationale: string[];
}

export interface RunPrivacy {
  sigma: number;
  clip_norm: number;
  injection?: string;
  sampler?: string;
  delta?: number;
  target?: { epsilon: number; delta: number };
}

export interface RunConfig {
  dataset_size: number;
  clients: number;
  rounds: number;
  batch_size: number;
  learning_rate: number;
  privacy: RunPrivacy | RunPrivacy[];
  features?: number;
  classes?: number;
  separation?: number;
  policy?: string;
  architecture?: string | { kind: string; hidden?: number };
  local_epochs?: number;
  seed?: number;
  test_fraction?: number;
  workers?: number;
  min_accuracy?: number;
  memory_budget?: number;
}

export type RunStatus = "pending" | "running" | "paused" | "done" | "aborted";

export interface RunHandle {
  run_id: string;
  status: RunStatus;
}

export interface RunListEntry {
  run_id: string;
  created_at: number;
  status: RunStatus;
}

export interface RunSnapshot {
  status: RunStatus;
  rounds_done: number;
  accuracy: number | null;
  loss: number | null;
  max_accuracy: number | null;
  diagnostic: string | null;
}

export interface RunDetail {
  run_id: string;
  status: RunStatus;
  config: RunConfig;
  snapshot: RunSnapshot | null;
}

// -- event stream -----------------------------------------------------------

export interface ClientRound {
  client: number;
  epsilon_spent: number | null;
  delta: number | null;
  memory_peak_units: number;
  batch_min: number;
  batch_mean: number;
  batch_max: number;
  skipped_steps: number;
  shard_accuracy: number;
}

export interface RoundEvent {
  type: "round_complete";
  round: number;
  accuracy: number;
  loss: number;
  clients: ClientRound[];
}

export interface WarningEvent {
  type: "warning";
  round: number;
  kind: string;
  message: string;
  remedies: string[];
}

export interface DoneEvent {
  type: "done";
  status: RunStatus;
  diagnostic: string | null;
  rounds: number;
}

export type RunEvent = RoundEvent | WarningEvent | DoneEvent;

// ---------------------------------------------------------------------------
// client
// ---------------------------------------------------------------------------

/** Raised for any non-2xx response, carrying the server's diagnostic. */
export class ServiceError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`service replied ${status}: ${detail}`);
    this.name = "ServiceError";
    this.status = status;
    this.detail = detail;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function normalizeDetail(payload: unknown): string {
  if (typeof payload === "string") return payload;
  if (payload && typeof payload === "object") {
    const detail = (payload as { detail?: unknown }).detail;
    if (typeof detail === "string") return detail;
    if (Array.isArray(detail)) {
      const parts = detail.map((item) =>
        item && typeof item === "object" && "msg" in item
          ? String((item as { msg: unknown }).msg)
          : JSON.stringify(item)
      );
      return parts.join("; ");
    }
    if (detail !== undefined) return JSON.stringify(detail);
  }
  return JSON.stringify(payload);
}

export class ServiceClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl =
      fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
    signal?: AbortSignal
  ): Promise<T> {
    const response = await this.raw(method, path, body, signal);
    return (await response.json()) as T;
  }

  /** Issue a request and fail loudly on non-2xx, keeping the Response. */
  async raw(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
    signal?: AbortSignal
  ): Promise<Response> {
    const init: RequestInit = { method, signal: signal ?? null };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let payload: unknown;
      try {
        payload = await response.json();
      } catch {
        payload = await response.text().catch(() => "");
      }
      throw new ServiceError(response.status, normalizeDetail(payload));
    }
    return response;
  }

  calibrate(body: CalibrateRequest): Promise<CalibrateResponse> {
    return this.request("POST", "/calibrate", body);
  }

  partitions(n: number, k: number, policy: string): Promise<number[]> {
    const query = new URLSearchParams({
      n: String(n),
      k: String(k),
      policy,
    });
    return this.request("GET", `/partitions?${query}`);
  }

  recommend(body: RecommendRequest): Promise<Recommendation> {
    return this.request("POST", "/recommend", body);
  }

  createRun(config: RunConfig): Promise<RunHandle> {
    return this.request("POST", "/runs", config);
  }

  listRuns(): Promise<RunListEntry[]> {
    return this.request("GET", "/runs");
  }

  runDetail(runId: string): Promise<RunDetail> {
    return this.request("GET", `/runs/${runId}`);
  }

  runWarnings(runId: string): Promise<WarningEvent[]> {
    return this.request("GET", `/runs/${runId}/warnings`);
  }

  pause(runId: string): Promise<RunHandle> {
    return this.request("POST", `/runs/${runId}/pause`);
  }

  resume(runId: string): Promise<RunHandle> {
    return this.request("POST", `/runs/${runId}/resume`);
  }

  abort(runId: string): Promise<RunHandle> {
    return this.request("POST", `/runs/${runId}/abort`);
  }

  /** Open the NDJSON round stream; the caller owns the response body. */
  openRounds(runId: string, signal?: AbortSignal): Promise<Response> {
    return this.raw("GET", `/runs/${runId}/rounds`, undefined, signal);
  }
}
