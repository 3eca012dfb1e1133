import type {
  GridInfo,
  NetworkInfo,
  QueryDraft,
  QueryResponse,
  StatsInfo,
  TrajectoryInfo,
} from "./types.js";
export class ApiError extends Error {
  constructor(
    public status: number,
    public payload: unknown,
  ) {
    super(`service returned ${status}`);
  }
}

export function queryBody(draft: QueryDraft): Record<string, unknown> {
  const modalities: Record<string, unknown> = {};
  if (draft.topologyPoints.length) modalities.topology = draft.topologyPoints;
  if (draft.roadIds.length) modalities.road = draft.roadIds;
  if (draft.regionIds.length) modalities.region = draft.regionIds;
  const body: Record<string, unknown> = { modalities, k: draft.k };
  if (draft.twoStage)
    body.two_stage = { coarse: draft.twoStage.coarse, subset: draft.twoStage.subset };
  return body;
}

/** Thin typed client; at most one query is in flight, a new submission
 * cancels the previous one. */
export class ApiClient {
  private inflight: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.json().catch(() => null));
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.getJson("/health");
  }

  stats(): Promise<StatsInfo> {
    return this.getJson("/stats");
  }

  grid(): Promise<GridInfo> {
    return this.getJson("/grid");
  }

  network(): Promise<NetworkInfo> {
    return this.getJson("/network");
  }

  trajectory(id: number): Promise<TrajectoryInfo> {
    return this.getJson(`/trajectories/${id}`);
  }

  async query(draft: QueryDraft): Promise<QueryResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(queryBody(draft)),
        signal: controller.signal,
      });
      if (!resp.ok) throw new ApiError(resp.status, await resp.json().catch(() => null));
      return (await resp.json()) as QueryResponse;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}
