import { Choice } from './types.js';

export interface PendingVote {
  index: number;
  choice: Choice;
}

type Sender = (index: number, choice: Choice) => Promise<unknown>;

/**
 * Ordered retry queue for vote submissions.
 *
 * Votes apply optimistically in the UI; failed sends stay queued (last
 * write per index wins) and flush on the next attempt, so a flaky
 * network never loses a revision.
 */
export class VoteQueue {
  private pending: PendingVote[] = [];
  private flushing = false;

  constructor(private readonly send: Sender) {}

  get pendingCount(): number {
    return this.pending.length;
  }

  get pendingVotes(): readonly PendingVote[] {
    return this.pending;
  }

  enqueue(index: number, choice: Choice): void {
    this.pending = this.pending.filter((v) => v.index !== index);
    this.pending.push({ index, choice });
  }

  /** Try to send everything; stops at the first failure. */
  async flush(): Promise<boolean> {
    if (this.flushing) return false;
    this.flushing = true;
    try {
      while (this.pending.length > 0) {
        const head = this.pending[0];
        try {
          await this.send(head.index, head.choice);
        } catch {
          return false;
        }
        this.pending.shift();
      }
      return true;
    } finally {
      this.flushing = false;
    }
  }

  async submit(index: number, choice: Choice): Promise<boolean> {
    this.enqueue(index, choice);
    return this.flush();
  }
}
