import { ApiClient } from './client.js';
import { SessionMachine, keyToAction } from './state.js';
import { PairView } from './types.js';

/**
 * DOM layer. Layout follows the evaluation screen: progress counter in
 * the top-left, prompt above the two images, a like button under each
 * image, the red X (tie) centered between them, navigation arrows and
 * the raise-hand control in the bottom-right.
 */
export class PairScreen {
  private root: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly client: ApiClient,
    private readonly machine: SessionMachine,
    private readonly sessionId: string,
  ) {
    this.root = root;
    document.addEventListener('keydown', (event) => {
      void this.handleKey(event.key);
    });
  }

  async handleKey(key: string): Promise<void> {
    const action = keyToAction(key);
    if (!action) return;
    if (action.kind === 'choose') {
      await this.machine.choose(action.choice);
    } else if (action.kind === 'navigate') {
      this.machine.navigate(action.direction);
    } else if (action.kind === 'submit') {
      await this.machine.submit();
    } else if (action.kind === 'raise-hand') {
      await this.client.raiseHand(this.sessionId, this.machine.snapshot().index);
    }
    await this.render();
  }

  async render(): Promise<void> {
    const snap = this.machine.snapshot();
    this.root.textContent = '';
    if (snap.screen === 'submitted') {
      this.root.appendChild(el('p', 'thanks', 'Evaluation submitted. Thank you!'));
      return;
    }
    if (snap.screen === 'completion') {
      const submit = button('submit', 'Submit evaluation', () => {
        void this.machine.submit().then(() => this.render());
      });
      submit.disabled = !snap.canSubmit;
      this.root.append(
        el('p', 'done-note', `All ${snap.pairCount} comparisons recorded.`),
        unsentNote(snap.unsentVotes),
        submit,
        button('back', '← revise', () => {
          this.machine.navigate('prev');
          void this.render();
        }),
      );
      return;
    }
    const pair = await this.client.getPair(this.sessionId, snap.index);
    this.root.append(
      el('div', 'counter', `${snap.index} / ${snap.pairCount}`),
      el('p', 'prompt', pair.prompt),
      this.imagePanel(pair),
      this.controls(pair),
      unsentNote(snap.unsentVotes),
    );
  }

  private imagePanel(pair: PairView): HTMLElement {
    const panel = el('div', 'images', '');
    for (const side of ['left', 'right'] as const) {
      const cell = el('figure', `cell-${side}`, '');
      const img = document.createElement('img');
      img.src = this.client.imageUrl(side === 'left' ? pair.left_image : pair.right_image);
      img.alt = `candidate ${side}`;
      img.addEventListener('error', () => {
        const placeholder = el('div', 'broken', 'image failed to load');
        placeholder.appendChild(
          button(`retry-${side}`, 'retry', () => {
            img.src = `${img.src.split('#')[0]}#${Date.now()}`;
            placeholder.replaceWith(img);
          }),
        );
        img.replaceWith(placeholder);
      });
      const like = button(`like-${side}`, `❤ like ${side}`, () => {
        void this.machine.choose(side).then(() => this.render());
      });
      if (pair.choice === side) like.classList.add('selected');
      cell.append(img, like);
      panel.appendChild(cell);
    }
    const tie = button('tie', '✖', () => {
      void this.machine.choose('tie').then(() => this.render());
    });
    tie.title = 'cannot decide (tie)';
    if (pair.choice === 'tie') tie.classList.add('selected');
    panel.appendChild(tie);
    return panel;
  }

  private controls(pair: PairView): HTMLElement {
    const snap = this.machine.snapshot();
    const bar = el('div', 'nav', '');
    const prev = button('prev', '←', () => {
      this.machine.navigate('prev');
      void this.render();
    });
    prev.disabled = !snap.canGoPrev;
    const next = button('next', '→', () => {
      this.machine.navigate('next');
      void this.render();
    });
    next.disabled = !snap.canGoNext;
    const hand = button('raise-hand', '✋', () => {
      void this.client.raiseHand(this.sessionId, pair.index);
    });
    hand.title = 'ask the organizers for help';
    bar.append(prev, next, hand);
    return bar;
  }
}

function el(tag: string, cls: string, text: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  if (text) node.textContent = text;
  return node;
}

function button(cls: string, label: string, onClick: () => void): HTMLButtonElement {
  const node = document.createElement('button');
  node.className = cls;
  node.type = 'button';
  node.textContent = label;
  node.addEventListener('click', onClick);
  return node;
}

function unsentNote(count: number): HTMLElement {
  const note = el('div', 'unsent', count > 0 ? `${count} vote(s) pending retry` : '');
  note.hidden = count === 0;
  return note;
}
