import type { SessionView, SummaryResponse } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`HTTP ${status}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the four session endpoints. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const parsed = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, parsed);
    }
    return parsed as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  startSession(query: string): Promise<SummaryResponse> {
    return this.request("POST", "/sessions", { query });
  }

  submitAnswer(sessionId: string, answer: string): Promise<SummaryResponse> {
    return this.request("POST", `/sessions/${sessionId}/answer`, { answer });
  }

  getView(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }
}
