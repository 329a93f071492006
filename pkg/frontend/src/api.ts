// Thin typed client over the service API. Every mutation in the UI goes
// through here; the app keeps no state the server doesn't have.

import type {
  AlertsResponse,
  ConceptResponse,
  ConceptsResponse,
  LabelResponse,
  Severity,
  TimelineResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class NetworkError extends Error {}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  url(path: string, params?: Record<string, number | string | undefined>): string {
    const query = Object.entries(params ?? {})
      .filter(([, v]) => v !== undefined)
      .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`)
      .join("&");
    return this.base + path + (query ? `?${query}` : "");
  }

  private async getJson<T>(url: string): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(url);
    } catch {
      throw new NetworkError(`cannot reach ${url}`);
    }
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
    }
    return body as T;
  }

  timeline(from?: number, to?: number): Promise<TimelineResponse> {
    return this.getJson(this.url("/api/timeline", { from, to }));
  }

  concepts(novelSince?: number): Promise<ConceptsResponse> {
    return this.getJson(this.url("/api/concepts", { novel_since: novelSince }));
  }

  concept(id: string): Promise<ConceptResponse> {
    return this.getJson(this.url(`/api/concepts/${encodeURIComponent(id)}`));
  }

  alerts(since?: number): Promise<AlertsResponse> {
    return this.getJson(this.url("/api/alerts", { since }));
  }

  async label(
    id: string,
    severity: Severity,
    note: string,
    key: string,
  ): Promise<LabelResponse> {
    let resp: Response;
    const url = this.url(`/api/concepts/${encodeURIComponent(id)}/label`);
    try {
      resp = await this.fetchFn(url, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ severity, note, key }),
      });
    } catch {
      throw new NetworkError(`cannot reach ${url}`);
    }
    const body = await resp.json().catch(() => ({}));
    if (resp.status === 404) {
      throw new ApiError(404, "concept not found");
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
    }
    return body as LabelResponse;
  }
}
