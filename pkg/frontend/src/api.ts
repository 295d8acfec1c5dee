import type { Choice, Expertise, PairPayload, SessionResult } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { detail?: string }).detail ?? resp.statusText);
  }
  return body as T;
}

export class TestClient {
  constructor(private baseUrl: string = "") {}

  async startSession(expertise: Expertise): Promise<string> {
    const body = await request<{ session_id: string }>(`${this.baseUrl}/api/session`, {
      method: "POST",
      body: JSON.stringify({ expertise }),
    });
    return body.session_id;
  }

  currentRound(sessionId: string): Promise<PairPayload> {
    return request<PairPayload>(`${this.baseUrl}/api/session/${sessionId}/round`);
  }

  async answer(sessionId: string, pairId: string, choice: Choice): Promise<void> {
    await request(`${this.baseUrl}/api/session/${sessionId}/round`, {
      method: "POST",
      body: JSON.stringify({ pair_id: pairId, choice }),
    });
  }

  result(sessionId: string): Promise<SessionResult> {
    return request<SessionResult>(`${this.baseUrl}/api/session/${sessionId}/result`);
  }
}
