// Session controller. The server is the only source of truth: every phase
// change re-reads it, so reloading the page (or building a second controller
// against the same session) reconstructs the identical view. At most one
// request chain is in flight; label attempts outside the "ready" phase are
// dropped, which is what guarantees one accepted POST per recorded label.

import { ApiError, LabelingApi, Label, NextItem, RoundRow, SessionSnapshot } from "./api.js";

export type Phase = "loading" | "ready" | "submitting" | "complete" | "error";

export interface ViewState {
  phase: Phase;
  snapshot: SessionSnapshot | null;
  item: NextItem | null;
  records: RoundRow[];
  error: string | null;
  checkpointPath: string | null;
}

const INITIAL: ViewState = {
  phase: "loading",
  snapshot: null,
  item: null,
  records: [],
  error: null,
  checkpointPath: null,
};

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status ? `HTTP ${err.status}: ${err.message}` : err.message;
  }
  return String(err);
}

export class SessionMachine {
  private state: ViewState = INITIAL;

  constructor(
    private readonly api: LabelingApi,
    private readonly onChange: (state: ViewState) => void = () => {},
  ) {}

  view(): ViewState {
    return this.state;
  }

  private set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  /** Fetch everything the view needs; also the reload and retry path. */
  async start(): Promise<void> {
    this.set({ ...INITIAL });
    await this.refresh();
  }

  private async refresh(): Promise<void> {
    try {
      const [snapshot, records] = await Promise.all([this.api.session(), this.api.metrics()]);
      const item = snapshot.done ? null : await this.api.next();
      this.set({
        phase: item === null ? "complete" : "ready",
        snapshot,
        records,
        item,
        error: null,
      });
    } catch (err) {
      this.set({ phase: "error", error: describe(err) });
    }
  }

  /** Label the pending item. A no-op unless one is awaiting a decision. */
  async choose(label: Label): Promise<void> {
    if (this.state.phase !== "ready" || this.state.item === null) return;
    const row = this.state.item.row_id;
    this.set({ phase: "submitting", checkpointPath: null });
    try {
      await this.api.label(row, label);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // another tab labeled this row first; resync instead of failing
        await this.refresh();
        return;
      }
      this.set({ phase: "error", error: describe(err) });
      return;
    }
    await this.refresh();
  }

  /** The retry banner's action: rebuild the whole view from the server. */
  async retry(): Promise<void> {
    await this.start();
  }

  async checkpoint(): Promise<void> {
    if (this.state.phase !== "ready" && this.state.phase !== "complete") return;
    try {
      const reply = await this.api.checkpoint();
      this.set({ checkpointPath: reply.path });
    } catch (err) {
      this.set({ phase: "error", error: describe(err) });
    }
  }
}
