import { ApiClient } from './client.js';
import { VoteQueue } from './queue.js';
import { SessionMachine } from './state.js';
import { PairScreen } from './render.js';

/**
 * Entry point. The service base URL is the single piece of
 * configuration: ?service=http://host:port (defaults to same origin).
 */
async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get('service') ?? '';
  const userId = params.get('user') ?? `user-${Math.floor(Math.random() * 1e6)}`;
  const seed = Number(params.get('seed') ?? '0');

  const client = new ApiClient(baseUrl);
  const resumeId = params.get('session');
  let sessionId: string;
  let pairCount: number;
  let stored = {};
  if (resumeId) {
    const info = await client.getSession(resumeId);
    sessionId = info.session_id;
    pairCount = info.pair_count;
    stored = info.choices;
  } else {
    const created = await client.createSession(userId, seed);
    sessionId = created.session_id;
    pairCount = created.pair_count;
  }

  const queue = new VoteQueue((index, choice) => client.putVote(sessionId, index, choice));
  const machine = new SessionMachine(pairCount, queue, stored);
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');
  const screen = new PairScreen(root, client, machine, sessionId);
  await screen.render();
  // Background flush keeps retrying votes that failed to send.
  setInterval(() => {
    void queue.flush();
  }, 3000);
}

void boot();
