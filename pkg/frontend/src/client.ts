import {
  Choice,
  CreateSessionResponse,
  PairView,
  SessionInfo,
  scanPayloadForModelIdentity,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the evaluation service.
 *
 * Every response body passes through the blinding scan; a payload that
 * carries model identity is a server bug the client refuses to render.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const raw = await res.text();
    if (!res.ok) {
      throw new Error(`${init?.method ?? 'GET'} ${path} failed: ${res.status} ${raw}`);
    }
    const leaked = scanPayloadForModelIdentity(raw);
    if (leaked !== null) {
      throw new Error(`blinding violation: payload contains '${leaked}'`);
    }
    return JSON.parse(raw) as T;
  }

  createSession(userId: string, seed: number): Promise<CreateSessionResponse> {
    return this.request<CreateSessionResponse>('/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ user_id: userId, seed }),
    });
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request<SessionInfo>(`/sessions/${sessionId}`);
  }

  getPair(sessionId: string, index: number): Promise<PairView> {
    return this.request<PairView>(`/sessions/${sessionId}/pairs/${index}`);
  }

  putVote(sessionId: string, index: number, choice: Choice): Promise<unknown> {
    return this.request(`/sessions/${sessionId}/votes/${index}`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ choice }),
    });
  }

  raiseHand(sessionId: string, index: number): Promise<unknown> {
    return this.request(`/sessions/${sessionId}/raise-hand`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ index }),
    });
  }

  imageUrl(path: string): string {
    return `${this.baseUrl}${path}`;
  }
}
