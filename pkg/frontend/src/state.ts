import { Choice } from './types.js';
import { VoteQueue } from './queue.js';

export type Screen = 'pair' | 'completion' | 'submitted';

export interface MachineSnapshot {
  screen: Screen;
  index: number;
  pairCount: number;
  progress: number;
  choices: ReadonlyMap<number, Choice>;
  unsentVotes: number;
  canGoPrev: boolean;
  canGoNext: boolean;
  canSubmit: boolean;
}

/**
 * Client-side session state machine.
 *
 * Mirrors the evaluation flow: vote -> auto-advance; arrows revise
 * earlier pairs; the final submit unlocks only once every pair has a
 * stored choice.
 */
export class SessionMachine {
  private index = 1;
  private screen: Screen = 'pair';
  private choices = new Map<number, Choice>();

  constructor(
    readonly pairCount: number,
    private readonly queue: VoteQueue,
    stored?: Record<string, Choice>,
  ) {
    if (stored) {
      for (const [key, choice] of Object.entries(stored)) {
        this.choices.set(Number(key), choice);
      }
    }
    if (pairCount === 0) {
      this.screen = 'completion';
    }
  }

  get progress(): number {
    return this.choices.size;
  }

  get complete(): boolean {
    return this.progress === this.pairCount;
  }

  snapshot(): MachineSnapshot {
    return {
      screen: this.screen,
      index: this.index,
      pairCount: this.pairCount,
      progress: this.progress,
      choices: this.choices,
      unsentVotes: this.queue.pendingCount,
      canGoPrev: this.screen === 'pair' && this.index > 1,
      canGoNext:
        (this.screen === 'pair' && this.index < this.pairCount) ||
        (this.screen === 'pair' && this.index === this.pairCount && this.complete),
      canSubmit: this.screen === 'completion' && this.complete,
    };
  }

  choiceFor(index: number): Choice | null {
    return this.choices.get(index) ?? null;
  }

  /** Record a preference for the current pair and advance. */
  async choose(choice: Choice): Promise<void> {
    if (this.screen !== 'pair') return;
    const at = this.index;
    this.choices.set(at, choice);
    if (at === this.pairCount) {
      if (this.complete) this.screen = 'completion';
    } else {
      this.index = at + 1;
    }
    await this.queue.submit(at, choice);
  }

  /** Arrow navigation; out-of-range movement is a no-op. */
  navigate(direction: 'prev' | 'next'): void {
    if (this.screen === 'completion' && direction === 'prev') {
      this.screen = 'pair';
      this.index = this.pairCount;
      return;
    }
    if (this.screen !== 'pair') return;
    if (direction === 'prev' && this.index > 1) {
      this.index -= 1;
    } else if (direction === 'next') {
      if (this.index < this.pairCount) {
        this.index += 1;
      } else if (this.complete) {
        this.screen = 'completion';
      }
    }
  }

  /** Final submission; only valid once every pair has a vote. */
  async submit(): Promise<boolean> {
    if (!(this.screen === 'completion' && this.complete)) return false;
    const flushed = await this.queue.flush();
    if (flushed) this.screen = 'submitted';
    return flushed;
  }
}

export type KeyAction =
  | { kind: 'choose'; choice: Choice }
  | { kind: 'navigate'; direction: 'prev' | 'next' }
  | { kind: 'submit' }
  | { kind: 'raise-hand' }
  | null;

/** Keyboard-only operation: every interaction has a key binding. */
export function keyToAction(key: string): KeyAction {
  switch (key) {
    case 'ArrowLeft':
      return { kind: 'navigate', direction: 'prev' };
    case 'ArrowRight':
      return { kind: 'navigate', direction: 'next' };
    case '1':
    case 'a':
      return { kind: 'choose', choice: 'left' };
    case '2':
    case 'l':
      return { kind: 'choose', choice: 'right' };
    case 'x':
    case '0':
      return { kind: 'choose', choice: 'tie' };
    case 'Enter':
      return { kind: 'submit' };
    case 'h':
      return { kind: 'raise-hand' };
    default:
      return null;
  }
}
