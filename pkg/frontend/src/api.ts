// Thin fetch client for the service; the UI has no other data source.

import type { SessionDoc, TableInfo, TurnDoc } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly kind: string,
    detail: string,
    public readonly status: number,
  ) {
    super(detail);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = await response.json();
    if (body && body.error) {
      return new ApiError(body.error.kind, body.error.detail, response.status);
    }
  } catch {
    /* non-JSON error body */
  }
  return new ApiError("http_error", `HTTP ${response.status}`, response.status);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  async listTables(): Promise<TableInfo[]> {
    const body = await this.request<{ tables: TableInfo[] }>("/tables");
    return body.tables;
  }

  async createSession(): Promise<string> {
    const body = await this.request<{ session_id: string }>("/sessions", {
      method: "POST",
      body: "{}",
    });
    return body.session_id;
  }

  async getSession(sessionId: string): Promise<SessionDoc> {
    return this.request<SessionDoc>(`/sessions/${sessionId}`);
  }

  async postTurn(sessionId: string, utterance: string): Promise<TurnDoc> {
    return this.request<TurnDoc>(`/sessions/${sessionId}/turns`, {
      method: "POST",
      body: JSON.stringify({ utterance }),
    });
  }
}
