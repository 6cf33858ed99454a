export type Choice = 'left' | 'right' | 'tie';

export interface PairView {
  index: number;
  pair_count: number;
  prompt: string;
  left_image: string;
  right_image: string;
  choice: Choice | null;
}

export interface SessionInfo {
  session_id: string;
  user_id: string;
  pair_count: number;
  progress: number;
  complete: boolean;
  choices: Record<string, Choice>;
}

export interface CreateSessionResponse {
  session_id: string;
  pair_count: number;
}

/** Strings that must never appear in any client-visible payload. */
export const FORBIDDEN_PAYLOAD_TOKENS = ['model', 'primary', 'baseline', 'ours'];

/**
 * Blinding guard: scans a raw payload for model-identity markers.
 * Returns the offending token, or null when the payload is clean.
 */
export function scanPayloadForModelIdentity(raw: string): string | null {
  const lowered = raw.toLowerCase();
  for (const token of FORBIDDEN_PAYLOAD_TOKENS) {
    if (lowered.includes(token)) return token;
  }
  return null;
}
