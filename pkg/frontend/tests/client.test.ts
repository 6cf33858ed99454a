import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/client.js';
import { scanPayloadForModelIdentity } from '../src/types.js';

function fakeFetch(body: unknown, status = 200) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), { status });
  };
  return { impl, calls };
}

const CLEAN_PAIR = {
  index: 1,
  pair_count: 400,
  prompt: 'a red circle in the center .',
  left_image: '/images/sess-0001/1/left',
  right_image: '/images/sess-0001/1/right',
  choice: null,
};

describe('ApiClient', () => {
  it('creates sessions against the configured base URL', async () => {
    const { impl, calls } = fakeFetch({ session_id: 's', pair_count: 400 });
    const client = new ApiClient('http://svc:8000', impl);
    const res = await client.createSession('u1', 7);
    expect(res.pair_count).toBe(400);
    expect(calls[0].url).toBe('http://svc:8000/sessions');
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ user_id: 'u1', seed: 7 });
  });

  it('submits votes with PUT to the vote route', async () => {
    const { impl, calls } = fakeFetch({ progress: 1, complete: false });
    const client = new ApiClient('', impl);
    await client.putVote('sess-1', 5, 'tie');
    expect(calls[0].url).toBe('/sessions/sess-1/votes/5');
    expect(calls[0].init?.method).toBe('PUT');
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ choice: 'tie' });
  });

  it('accepts blinded pair payloads', async () => {
    const { impl } = fakeFetch(CLEAN_PAIR);
    const client = new ApiClient('', impl);
    const pair = await client.getPair('sess-1', 1);
    expect(pair.prompt).toContain('red circle');
  });

  it('rejects payloads that leak model identity', async () => {
    const leaky = { ...CLEAN_PAIR, generator: 'baseline-alpha' };
    const { impl } = fakeFetch(leaky);
    const client = new ApiClient('', impl);
    await expect(client.getPair('sess-1', 1)).rejects.toThrow(/blinding/);
  });

  it('surfaces HTTP errors with context', async () => {
    const { impl } = fakeFetch({ detail: 'nope' }, 404);
    const client = new ApiClient('', impl);
    await expect(client.getPair('missing', 1)).rejects.toThrow(/404/);
  });
});

describe('scanPayloadForModelIdentity', () => {
  it('flags identity markers case-insensitively', () => {
    expect(scanPayloadForModelIdentity('{"x":"Primary"}')).toBe('primary');
    expect(scanPayloadForModelIdentity('{"x":"the MODEL name"}')).toBe('model');
    expect(scanPayloadForModelIdentity(JSON.stringify(CLEAN_PAIR))).toBeNull();
  });
});
