import { describe, expect, it } from 'vitest';

import { VoteQueue } from '../src/queue.js';
import { SessionMachine, keyToAction } from '../src/state.js';
import { Choice } from '../src/types.js';

function machine(pairCount: number, stored?: Record<string, Choice>) {
  const sent: Array<[number, Choice]> = [];
  const queue = new VoteQueue(async (index, choice) => {
    sent.push([index, choice]);
  });
  return { m: new SessionMachine(pairCount, queue, stored), sent };
}

describe('SessionMachine', () => {
  it('advances automatically after a vote', async () => {
    const { m, sent } = machine(3);
    await m.choose('left');
    expect(m.snapshot().index).toBe(2);
    expect(sent).toEqual([[1, 'left']]);
  });

  it('shows the completion screen after the final vote', async () => {
    const { m } = machine(2);
    await m.choose('tie');
    await m.choose('right');
    expect(m.snapshot().screen).toBe('completion');
    expect(m.snapshot().canSubmit).toBe(true);
  });

  it('final pair without full progress stays on the pair screen', async () => {
    const { m } = machine(3);
    m.navigate('next');
    m.navigate('next');
    await m.choose('left'); // only pair 3 voted
    expect(m.snapshot().screen).toBe('pair');
    expect(m.snapshot().index).toBe(3);
  });

  it('prev is disabled on the first pair', () => {
    const { m } = machine(3);
    expect(m.snapshot().canGoPrev).toBe(false);
    m.navigate('prev');
    expect(m.snapshot().index).toBe(1);
  });

  it('next at the end requires completeness', () => {
    const { m } = machine(2);
    m.navigate('next');
    expect(m.snapshot().index).toBe(2);
    m.navigate('next'); // incomplete: no-op
    expect(m.snapshot().screen).toBe('pair');
  });

  it('revision flow: back, change vote, forward', async () => {
    const { m, sent } = machine(3);
    await m.choose('left');
    await m.choose('left');
    m.navigate('prev');
    expect(m.snapshot().index).toBe(2);
    await m.choose('right');
    expect(m.choiceFor(2)).toBe('right');
    expect(sent).toEqual([[1, 'left'], [2, 'left'], [2, 'right']]);
  });

  it('never allows submission before every pair is voted', async () => {
    const { m } = machine(2);
    expect(await m.submit()).toBe(false);
    await m.choose('left');
    expect(await m.submit()).toBe(false);
    await m.choose('left');
    expect(m.snapshot().screen).toBe('completion');
    expect(await m.submit()).toBe(true);
    expect(m.snapshot().screen).toBe('submitted');
  });

  it('restores stored choices and counts progress', () => {
    const { m } = machine(3, { '1': 'left', '3': 'tie' });
    expect(m.progress).toBe(2);
    expect(m.choiceFor(3)).toBe('tie');
  });

  it('completion screen allows going back to revise', async () => {
    const { m } = machine(1);
    await m.choose('left');
    expect(m.snapshot().screen).toBe('completion');
    m.navigate('prev');
    const snap = m.snapshot();
    expect(snap.screen).toBe('pair');
    expect(snap.index).toBe(1);
  });

  it('zero-pair sessions start complete', () => {
    const { m } = machine(0);
    expect(m.snapshot().screen).toBe('completion');
    expect(m.snapshot().canSubmit).toBe(true);
  });
});

describe('keyboard bindings', () => {
  it('covers every interaction', () => {
    expect(keyToAction('ArrowLeft')).toEqual({ kind: 'navigate', direction: 'prev' });
    expect(keyToAction('ArrowRight')).toEqual({ kind: 'navigate', direction: 'next' });
    expect(keyToAction('a')).toEqual({ kind: 'choose', choice: 'left' });
    expect(keyToAction('l')).toEqual({ kind: 'choose', choice: 'right' });
    expect(keyToAction('x')).toEqual({ kind: 'choose', choice: 'tie' });
    expect(keyToAction('Enter')).toEqual({ kind: 'submit' });
    expect(keyToAction('h')).toEqual({ kind: 'raise-hand' });
    expect(keyToAction('q')).toBeNull();
  });

  it('keyboard alone reaches every screen state', async () => {
    const { m } = machine(2);
    const press = async (key: string) => {
      const action = keyToAction(key);
      if (!action) return;
      if (action.kind === 'choose') await m.choose(action.choice);
      if (action.kind === 'navigate') m.navigate(action.direction);
      if (action.kind === 'submit') await m.submit();
    };
    await press('a');          // vote pair 1, advance
    await press('ArrowLeft');  // back to pair 1
    await press('x');          // revise to tie, advance
    await press('l');          // vote pair 2 -> completion
    expect(m.snapshot().screen).toBe('completion');
    await press('Enter');      // submit
    expect(m.snapshot().screen).toBe('submitted');
  });
});
