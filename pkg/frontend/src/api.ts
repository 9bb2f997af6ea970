import type { Category, LabelResponse, NextResponse } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** Thin typed client for the grading service; all state lives server-side. */
export class GradingApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.url(path), init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  fetchNext(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${sessionId}/next`);
  }

  submitLabel(
    sessionId: string,
    itemId: string,
    blindKey: string,
    category: Category,
  ): Promise<LabelResponse> {
    return this.request<LabelResponse>(`/sessions/${sessionId}/labels`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ item_id: itemId, blind_key: blindKey, category }),
    });
  }

  completeSession(sessionId: string): Promise<{ state: string }> {
    return this.request<{ state: string }>(`/sessions/${sessionId}/complete`, {
      method: 'POST',
    });
  }

  exportUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/export.csv`);
  }
}
