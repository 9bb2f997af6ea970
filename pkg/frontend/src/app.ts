import { ApiError, GradingApi } from './api.js';
import { CATEGORIES, type Category, type PendingAnswer, type Progress } from './types.js';

// One answer at a time; every number shown comes from the service API.
export type ViewState =
  | { kind: 'loading' }
  | {
      kind: 'grading';
      item: PendingAnswer;
      progress: Progress;
      selected: Category | null;
      error: string | null;
      showContext: boolean;
      submitting: boolean;
    }
  | { kind: 'complete'; progress: Progress; exportUrl: string }
  | { kind: 'fatal'; message: string };

export class ReviewApp {
  private state: ViewState = { kind: 'loading' };
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(
    private readonly api: GradingApi,
    private readonly sessionId: string,
  ) {}

  getState(): ViewState {
    return this.state;
  }

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private setState(state: ViewState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  /** Load the next ungraded answer (or the completion screen). */
  async start(): Promise<void> {
    try {
      const next = await this.api.fetchNext(this.sessionId);
      if (next.complete || !next.item) {
        await this.finishSession(next.progress);
        return;
      }
      this.setState({
        kind: 'grading',
        item: next.item,
        progress: next.progress,
        selected: null,
        error: null,
        showContext: false,
        submitting: false,
      });
    } catch (error) {
      this.setState({ kind: 'fatal', message: describe(error) });
    }
  }

  private async finishSession(progress: Progress): Promise<void> {
    try {
      await this.api.completeSession(this.sessionId);
    } catch {
      // Already complete or completed by another tab; the export link still works.
    }
    this.setState({
      kind: 'complete',
      progress,
      exportUrl: this.api.exportUrl(this.sessionId),
    });
  }

  select(category: Category): void {
    if (this.state.kind !== 'grading' || this.state.submitting) return;
    this.setState({ ...this.state, selected: category, error: null });
  }

  toggleContext(): void {
    if (this.state.kind !== 'grading') return;
    this.setState({ ...this.state, showContext: !this.state.showContext });
  }

  /** Keyboard shortcuts: 1-4 pick a category, Enter submits, c toggles context. */
  handleKey(key: string): void {
    const index = Number.parseInt(key, 10) - 1;
    if (index >= 0 && index < CATEGORIES.length) {
      this.select(CATEGORIES[index]);
      return;
    }
    if (key === 'Enter') void this.submit();
    if (key === 'c') this.toggleContext();
  }

  /**
   * Submit the selected category, advancing optimistically: the POST and the
   * fetch of the next answer run as one step, and a server error rolls the
   * view back to the same answer with an inline banner (the label stays
   * retriable).
   */
  async submit(): Promise<boolean> {
    if (this.state.kind !== 'grading' || this.state.submitting) return false;
    const grading = this.state;
    const selected = grading.selected;
    if (selected === null) return false;
    this.setState({ ...grading, submitting: true, error: null });
    try {
      await this.api.submitLabel(
        this.sessionId,
        grading.item.item_id,
        grading.item.blind_key,
        selected,
      );
    } catch (error) {
      // Rollback: same answer, inline error, selection preserved.
      this.setState({ ...grading, submitting: false, error: describe(error) });
      return false;
    }
    await this.start();
    return true;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `Server error (${error.status}): ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
