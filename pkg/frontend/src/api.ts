// Typed client for the labeling service HTTP API. fetch is injected so unit
// tests and the e2e harness can drive the client outside a browser.

export interface SessionSnapshot {
  concept: string;
  budget: number;
  batch_size: number;
  labeled: number;
  positives: number;
  round: number | null;
  pool_size: number;
  pool_frac: number;
  done: boolean;
}

export interface NextItem {
  row_id: number;
  external_id: string;
  payload_uri?: string;
}

// One results-file line; ap is null for sessions without an eval split.
export interface RoundRow {
  concept: string;
  rep: number;
  round: number;
  labeled: number;
  positives: number;
  pool_size: number;
  pool_frac: number;
  ap: number | null;
  t_select_s: number;
  t_knn_s: number;
  t_train_s: number;
}

export interface LabelReply {
  ok: boolean;
  labeled: number;
  done: boolean;
}

export interface CheckpointReply {
  path: string;
  round: number;
}

export type Label = 1 | -1;

export class ApiError extends Error {
  // status 0 means the request never reached the server
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

// The surface the session controller depends on; ApiClient is the real
// implementation, tests substitute scripted fakes.
export interface LabelingApi {
  session(): Promise<SessionSnapshot>;
  next(): Promise<NextItem | null>;
  label(rowId: number, label: Label): Promise<LabelReply>;
  metrics(): Promise<RoundRow[]>;
  checkpoint(): Promise<CheckpointReply>;
}

export class ApiClient implements LabelingApi {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, {
        method,
        ...(body === undefined
          ? {}
          : {
              headers: { "Content-Type": "application/json" },
              body: JSON.stringify(body),
            }),
      });
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    const text = await resp.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null; // non-JSON error body; fall through to the status line
    }
    if (!resp.ok) {
      const detail =
        parsed !== null && typeof parsed === "object" && "error" in parsed
          ? String((parsed as { error: unknown }).error)
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return parsed as T;
  }

  session(): Promise<SessionSnapshot> {
    return this.request("GET", "/api/session");
  }

  /** The row awaiting a label, or null once the budget is spent (410). */
  async next(): Promise<NextItem | null> {
    try {
      return await this.request<NextItem>("GET", "/api/next");
    } catch (err) {
      if (err instanceof ApiError && err.status === 410) return null;
      throw err;
    }
  }

  label(rowId: number, label: Label): Promise<LabelReply> {
    return this.request("POST", "/api/label", { row_id: rowId, label });
  }

  async metrics(): Promise<RoundRow[]> {
    const body = await this.request<{ records: RoundRow[] }>("GET", "/api/metrics");
    return body.records;
  }

  checkpoint(): Promise<CheckpointReply> {
    return this.request("POST", "/api/checkpoint");
  }
}
