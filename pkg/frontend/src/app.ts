/**
 * AnnotatorApp - DOM composition for the labeling tool.
 *
 * Layout: progress header, frame strip with timestamps, label buttons,
 * interval readout, submit. Keyboard-first:
 *
 *   r / i          choose relevant / irrelevant
 *   click, click   anchor then close an interval on the frame strip
 *   Left / Right   slide the interval by one second
 *   Shift+arrows   grow / shrink the interval end by one second
 *   Enter          submit and auto-load the next task
 */

import { LabelName, TaskDto } from './api.js';
import { MAX_SPAN_S, MIN_SPAN_S, resizeSpan, shiftSpan } from './intervalRules.js';
import { AnnotationStore } from './store.js';

export class AnnotatorApp {
  private readonly root: HTMLElement;
  private readonly store: AnnotationStore;
  /** First click on the strip anchors the span; the second closes it. */
  private anchorS: number | null = null;
  private readonly boundOnKeyDown: (event: KeyboardEvent) => void;

  constructor(root: HTMLElement, store: AnnotationStore) {
    this.root = root;
    this.store = store;
    this.boundOnKeyDown = (event) => this.onKeyDown(event);
  }

  mount(): void {
    this.store.subscribe(() => this.render());
    document.addEventListener('keydown', this.boundOnKeyDown);
    this.render();
  }

  unmount(): void {
    document.removeEventListener('keydown', this.boundOnKeyDown);
  }

  private onKeyDown(event: KeyboardEvent): void {
    if (event.target instanceof HTMLInputElement) {
      return; // let number fields behave like number fields
    }
    const { task, draftSpan } = this.store.snapshot;
    if (!task) {
      return;
    }
    switch (event.key) {
      case 'r':
        this.store.chooseLabel('relevant');
        break;
      case 'i':
        this.store.chooseLabel('irrelevant');
        break;
      case 'Enter':
        void this.store.submit();
        break;
      case 'ArrowLeft':
      case 'ArrowRight': {
        if (!draftSpan) {
          return;
        }
        const delta = event.key === 'ArrowRight' ? 1 : -1;
        const next = event.shiftKey
          ? resizeSpan(draftSpan, delta, task.duration_s)
          : shiftSpan(draftSpan, delta, task.duration_s);
        this.store.updateSpan(next);
        event.preventDefault();
        break;
      }
      default:
        return;
    }
  }

  // -- rendering ---------------------------------------------------------

  private render(): void {
    const state = this.store.snapshot;
    this.root.replaceChildren();
    this.root.appendChild(this.renderHeader());

    switch (state.phase) {
      case 'loading':
        this.root.appendChild(message('loading…'));
        return;
      case 'error':
        this.root.appendChild(message(`service unreachable: ${state.errorMessage ?? ''}`));
        return;
      case 'empty':
        this.root.appendChild(message('all videos are labeled — nothing left to review'));
        return;
      case 'task':
        break;
    }
    const task = state.task;
    if (!task) {
      return;
    }

    if (state.conflict || state.notice) {
      const banner = el('div', state.conflict ? 'banner conflict' : 'banner');
      banner.textContent = state.notice ?? '';
      this.root.appendChild(banner);
    }

    const card = el('section', 'task-card');
    const title = el('h2');
    title.textContent = `${task.local_id} · ${task.duration_s.toFixed(1)} s`;
    card.appendChild(title);
    card.appendChild(this.renderStrip(task));
    card.appendChild(this.renderLabelRow());
    card.appendChild(this.renderIntervalRow(task));
    card.appendChild(this.renderSubmitRow());
    this.root.appendChild(card);
  }

  private renderHeader(): HTMLElement {
    const progress = this.store.snapshot.progress;
    const header = el('header', 'progress');
    const title = el('h1');
    title.textContent = 'whale video annotator';
    header.appendChild(title);
    const counters = el('div', 'counters');
    if (progress) {
      for (const [name, count] of [
        ['relevant', progress.relevant],
        ['irrelevant', progress.irrelevant],
        ['unlabeled', progress.unlabeled],
      ] as const) {
        const chip = el('span', `chip ${name}`);
        chip.textContent = `${name} ${count}`;
        counters.appendChild(chip);
      }
    }
    header.appendChild(counters);
    return header;
  }

  private renderStrip(task: TaskDto): HTMLElement {
    const strip = el('div', 'frame-strip');
    if (task.frames.length === 0) {
      strip.appendChild(
        message('no cached frames for this video yet — set the interval numerically below'),
      );
      return strip;
    }
    const times = task.timestamps_s ?? evenTimestamps(task.frames.length, task.duration_s);
    task.frames.forEach((url, index) => {
      const t = times[index];
      const figure = el('figure', this.inSpan(t) ? 'frame selected' : 'frame');
      const img = document.createElement('img');
      img.src = url;
      img.alt = `frame at ${t.toFixed(1)} s`;
      img.loading = 'lazy';
      const caption = el('figcaption');
      caption.textContent = `${t.toFixed(1)}s`;
      figure.append(img, caption);
      figure.addEventListener('click', () => this.onFrameClick(t));
      strip.appendChild(figure);
    });
    return strip;
  }

  private inSpan(t: number): boolean {
    const span = this.store.snapshot.draftSpan;
    return span !== null && t >= span.startS && t <= span.endS;
  }

  private onFrameClick(t: number): void {
    if (this.anchorS === null) {
      this.anchorS = t;
      this.store.setSpan(t, t + MIN_SPAN_S); // provisional span from the anchor
    } else {
      this.store.setSpan(this.anchorS, t);
      this.anchorS = null;
    }
  }

  private renderLabelRow(): HTMLElement {
    const { draftLabel, busy } = this.store.snapshot;
    const row = el('div', 'label-row');
    for (const label of ['relevant', 'irrelevant'] as LabelName[]) {
      const button = document.createElement('button');
      button.type = 'button';
      button.className = draftLabel === label ? `label ${label} active` : `label ${label}`;
      button.textContent = `${label} (${label[0]})`;
      button.disabled = busy;
      button.addEventListener('click', () => this.store.chooseLabel(label));
      row.appendChild(button);
    }
    return row;
  }

  private renderIntervalRow(task: TaskDto): HTMLElement {
    const { draftLabel, draftSpan } = this.store.snapshot;
    const row = el('div', 'interval-row');
    if (draftLabel === 'irrelevant') {
      row.appendChild(
        message('irrelevant videos get a machine-assigned 15 s excerpt — no interval to mark'),
      );
      return row;
    }

    const hint = el('span', 'hint');
    hint.textContent = `occurrence interval (${MIN_SPAN_S}–${MAX_SPAN_S} s):`;
    row.appendChild(hint);

    const startInput = numberInput(draftSpan?.startS ?? 0, 0, task.duration_s);
    const endInput = numberInput(draftSpan?.endS ?? Math.min(MIN_SPAN_S, task.duration_s), 0, task.duration_s);
    const apply = () => this.store.setSpan(Number(startInput.value), Number(endInput.value));
    startInput.addEventListener('change', apply);
    endInput.addEventListener('change', apply);
    row.append(startInput, el('span', 'dash', '–'), endInput);

    const readout = el('span', 'readout');
    readout.textContent = draftSpan
      ? `${draftSpan.startS.toFixed(1)}–${draftSpan.endS.toFixed(1)} s (${(
          draftSpan.endS - draftSpan.startS
        ).toFixed(1)} s long)`
      : 'none marked';
    row.appendChild(readout);
    return row;
  }

  private renderSubmitRow(): HTMLElement {
    const row = el('div', 'submit-row');
    const button = document.createElement('button');
    button.type = 'button';
    button.className = 'submit';
    button.textContent = this.store.snapshot.busy ? 'saving…' : 'submit (Enter)';
    button.disabled = !this.store.canSubmit;
    button.addEventListener('click', () => void this.store.submit());
    row.appendChild(button);
    if (!this.store.canSubmit && !this.store.snapshot.busy) {
      row.appendChild(message('choose a label first (r / i)'));
    }
    return row;
  }
}

// -- tiny DOM helpers ------------------------------------------------------

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function message(text: string): HTMLElement {
  return el('p', 'message', text);
}

function numberInput(value: number, min: number, max: number): HTMLInputElement {
  const input = document.createElement('input');
  input.type = 'number';
  input.step = '0.5';
  input.min = String(min);
  input.max = String(max);
  input.value = String(value);
  return input;
}

/** Fallback timestamps when the frame index has none: frame midpoints. */
function evenTimestamps(count: number, durationS: number): number[] {
  const step = durationS / count;
  return Array.from({ length: count }, (_, i) => (i + 0.5) * step);
}
