/** Thin typed wrappers over the stepchat service HTTP API. */

import type {
  QuestionnaireData,
  QuestionnairePayload,
  SessionEvent,
  SessionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(
  fetchFn: typeof fetch,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const response = await fetchFn(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string; error?: string };
      detail = body.detail ?? body.error ?? detail;
    } catch {
      // non-JSON error body: keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class StepchatApi {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  createSession(seedId: string, system = "s2"): Promise<{ session_id: string }> {
    return request(this.fetchFn, `${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify({ seed_id: seedId, system }),
    });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return request(this.fetchFn, `${this.baseUrl}/sessions/${sessionId}`);
  }

  postMessage(sessionId: string, text: string): Promise<{ seq: number }> {
    return request(this.fetchFn, `${this.baseUrl}/sessions/${sessionId}/messages`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  closeSession(sessionId: string): Promise<{ status: string }> {
    return request(this.fetchFn, `${this.baseUrl}/sessions/${sessionId}/close`, {
      method: "POST",
      body: "{}",
    });
  }

  newQuestionnaire(raterId: string): Promise<QuestionnaireData> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/questionnaires/new?rater=${encodeURIComponent(raterId)}`,
    );
  }

  submitQuestionnaire(payload: QuestionnairePayload): Promise<{ accepted: boolean }> {
    return request(this.fetchFn, `${this.baseUrl}/questionnaires`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  /** Debug mode only: full internal records including think traces. */
  sessionRecords(sessionId: string): Promise<{ records: Array<Record<string, unknown>> }> {
    return request(this.fetchFn, `${this.baseUrl}/sessions/${sessionId}/records`);
  }
}

export type { SessionEvent };
