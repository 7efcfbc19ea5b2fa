/**
 * AnnotationStore - the single-page client's state machine.
 *
 * Holds the current task plus the annotator's draft (label, interval) and
 * runs the submit flow:
 *
 *   label chosen -> POST label -> (relevant + span drawn?) POST interval
 *   -> refresh progress -> auto-load the next unlabeled task
 *
 * At most one mutation is in flight at a time. A 409 conflict reloads the
 * task from the service and surfaces a notice instead of overwriting the
 * other annotator's write. All persisted state lives server-side, so a
 * page refresh loses nothing.
 */

import { AnnotationApi, ApiError, ConflictError, LabelName, ProgressDto, TaskDto } from './api.js';
import { Span, clampSpan, validateSpan } from './intervalRules.js';

export type Phase = 'loading' | 'task' | 'empty' | 'error';

export interface StoreState {
  phase: Phase;
  task: TaskDto | null;
  draftLabel: LabelName | null;
  draftSpan: Span | null;
  /** True while a submit is in flight; input is ignored meanwhile. */
  busy: boolean;
  /** One-line message for the annotator (conflict reloads, rule hints). */
  notice: string | null;
  /** Set when the last submit hit a version conflict and the task was reloaded. */
  conflict: boolean;
  progress: ProgressDto | null;
  errorMessage: string | null;
}

type Listener = () => void;

export class AnnotationStore {
  private state: StoreState = {
    phase: 'loading',
    task: null,
    draftLabel: null,
    draftSpan: null,
    busy: false,
    notice: null,
    conflict: false,
    progress: null,
    errorMessage: null,
  };
  private listeners: Listener[] = [];

  constructor(private readonly api: AnnotationApi) {}

  /** Read-only view of the current state. */
  get snapshot(): Readonly<StoreState> {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  private patch(partial: Partial<StoreState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  /** Load progress counters and the first unlabeled task. */
  async start(): Promise<void> {
    this.patch({ phase: 'loading' });
    try {
      await this.refreshProgress();
      await this.loadNext();
    } catch (err) {
      this.patch({ phase: 'error', errorMessage: describe(err) });
    }
  }

  /** Advance to the next unlabeled task (or the empty state). */
  async loadNext(): Promise<void> {
    const queue = await this.api.listVideos('unlabeled');
    if (queue.length === 0) {
      this.patch({
        phase: 'empty',
        task: null,
        draftLabel: null,
        draftSpan: null,
        conflict: false,
      });
      return;
    }
    this.patch({
      phase: 'task',
      task: queue[0],
      draftLabel: null,
      draftSpan: null,
      notice: null,
      conflict: false,
    });
  }

  /** Re-fetch the current task, dropping local drafts (used after conflicts). */
  async reloadTask(): Promise<void> {
    const current = this.state.task;
    if (!current) {
      return;
    }
    const fresh = await this.api.getTask(current.local_id);
    this.patch({ task: fresh, draftLabel: null, draftSpan: null });
  }

  async refreshProgress(): Promise<void> {
    this.patch({ progress: await this.api.progress() });
  }

  /** Keyboard r/i or a label button. */
  chooseLabel(label: LabelName): void {
    if (this.state.busy || !this.state.task) {
      return;
    }
    // An interval only accompanies a relevant label; drop the draft span
    // when the annotator switches to irrelevant.
    const draftSpan = label === 'relevant' ? this.state.draftSpan : null;
    this.patch({ draftLabel: label, draftSpan, notice: null });
  }

  /**
   * Set the draft interval from a raw drag. The drag is clamped into the
   * 10-20 s rules first; when the video is too short for any valid span
   * the draft stays empty and the constraint is shown instead.
   */
  setSpan(rawStartS: number, rawEndS: number): void {
    const task = this.state.task;
    if (this.state.busy || !task) {
      return;
    }
    const span = clampSpan(rawStartS, rawEndS, task.duration_s);
    const violation = validateSpan(span, task.duration_s);
    if (violation) {
      this.patch({ draftSpan: null, notice: violation });
      return;
    }
    const clamped =
      span.startS !== Math.min(rawStartS, rawEndS) || span.endS !== Math.max(rawStartS, rawEndS);
    this.patch({
      draftSpan: span,
      notice: clamped ? 'span adjusted to the 10-20 s rule' : null,
    });
  }

  /** Replace the draft span with an already-validated one (arrow keys). */
  updateSpan(span: Span): void {
    const task = this.state.task;
    if (this.state.busy || !task) {
      return;
    }
    if (validateSpan(span, task.duration_s) === null) {
      this.patch({ draftSpan: span });
    }
  }

  /** Submit needs a label; everything else is optional. */
  get canSubmit(): boolean {
    return this.state.phase === 'task' && this.state.draftLabel !== null && !this.state.busy;
  }

  /**
   * POST the draft: always the label, then the interval when one was drawn
   * for a relevant video. Versions chain: the interval POST carries the
   * version returned by the label POST.
   */
  async submit(): Promise<void> {
    const { task, draftLabel, draftSpan } = this.state;
    if (!this.canSubmit || !task || !draftLabel) {
      return;
    }
    this.patch({ busy: true, notice: null, conflict: false });
    try {
      let updated = await this.api.submitLabel(task.local_id, draftLabel, task.version);
      if (draftLabel === 'relevant' && draftSpan) {
        updated = await this.api.submitInterval(
          task.local_id,
          draftSpan.startS,
          draftSpan.endS,
          updated.version,
        );
      }
      await this.refreshProgress();
      await this.loadNext();
    } catch (err) {
      if (err instanceof ConflictError) {
        // Someone else labeled this video first: reload their version and
        // let the annotator re-check rather than overwrite.
        await this.reloadTask();
        this.patch({
          conflict: true,
          notice: 'this video changed under you - reloaded the latest version, please re-check',
        });
      } else {
        this.patch({ notice: describe(err) });
      }
    } finally {
      this.patch({ busy: false });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return err instanceof Error ? err.message : String(err);
}
