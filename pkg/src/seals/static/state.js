// Session controller. The server is the only source of truth: every phase
// change re-reads it, so reloading the page (or building a second controller
// against the same session) reconstructs the identical view. At most one
// request chain is in flight; label attempts outside the "ready" phase are
// dropped, which is what guarantees one accepted POST per recorded label.
import { ApiError } from "./api.js";
const INITIAL = {
    phase: "loading",
    snapshot: null,
    item: null,
    records: [],
    error: null,
    checkpointPath: null,
};
function describe(err) {
    if (err instanceof ApiError) {
        return err.status ? `HTTP ${err.status}: ${err.message}` : err.message;
    }
    return String(err);
}
export class SessionMachine {
    constructor(api, onChange = () => { }) {
        this.api = api;
        this.onChange = onChange;
        this.state = INITIAL;
    }
    view() {
        return this.state;
    }
    set(patch) {
        this.state = { ...this.state, ...patch };
        this.onChange(this.state);
    }
    /** Fetch everything the view needs; also the reload and retry path. */
    async start() {
        this.set({ ...INITIAL });
        await this.refresh();
    }
    async refresh() {
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
        }
        catch (err) {
            this.set({ phase: "error", error: describe(err) });
        }
    }
    /** Label the pending item. A no-op unless one is awaiting a decision. */
    async choose(label) {
        if (this.state.phase !== "ready" || this.state.item === null)
            return;
        const row = this.state.item.row_id;
        this.set({ phase: "submitting", checkpointPath: null });
        try {
            await this.api.label(row, label);
        }
        catch (err) {
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
    async retry() {
        await this.start();
    }
    async checkpoint() {
        if (this.state.phase !== "ready" && this.state.phase !== "complete")
            return;
        try {
            const reply = await this.api.checkpoint();
            this.set({ checkpointPath: reply.path });
        }
        catch (err) {
            this.set({ phase: "error", error: describe(err) });
        }
    }
}
