// Typed client for the session service wire format (version 1).

export interface Status {
  version: number;
  run_id: string;
  status: string;
  iteration: number;
  batch_size: number;
  answered_total: number;
  answered_in_batch: number;
  remaining_in_batch: number;
  pending: boolean;
  env: string;
  dt: number;
}

export interface Track {
  states: number[][];
  actions: number[][];
}

export interface PendingQuery {
  query_id: number;
  iteration: number;
  answered_in_batch: number;
  batch_size: number;
  env: string;
  dt: number;
  left: Track;
  right: Track;
}

export interface QueryResponse {
  version: number;
  status: string;
  pending: PendingQuery | null;
}

export interface CurvePoint {
  queries: number;
  mean: number;
  std: number;
  iteration: number;
}

export interface LabelResult {
  ok: boolean;
  conflict: boolean;
  error?: string;
}

export class SessionApi {
  constructor(readonly base: string = "") {}

  async status(): Promise<Status> {
    const res = await fetch(`${this.base}/status`);
    return (await res.json()) as Status;
  }

  async query(): Promise<QueryResponse> {
    const res = await fetch(`${this.base}/query`);
    return (await res.json()) as QueryResponse;
  }

  async curve(): Promise<CurvePoint[]> {
    const res = await fetch(`${this.base}/curve`);
    const body = (await res.json()) as { points: CurvePoint[] };
    return body.points;
  }

  /** Posts a label exactly once; a 409 means the query was already resolved. */
  async submitLabel(queryId: number, label: 0 | 1): Promise<LabelResult> {
    const res = await fetch(`${this.base}/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, label }),
    });
    if (res.ok) return { ok: true, conflict: false };
    const body = (await res.json().catch(() => ({ error: "bad response" }))) as {
      error?: string;
    };
    return { ok: false, conflict: res.status === 409, error: body.error };
  }
}
