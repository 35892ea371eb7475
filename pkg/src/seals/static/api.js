// Typed client for the labeling service HTTP API. fetch is injected so unit
// tests and the e2e harness can drive the client outside a browser.
export class ApiError extends Error {
    // status 0 means the request never reached the server
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
export class ApiClient {
    constructor(base, fetchFn) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    async request(method, path, body) {
        let resp;
        try {
            resp = await this.fetchFn(this.base + path, {
                method,
                ...(body === undefined
                    ? {}
                    : {
                        headers: { "Content-Type": "application/json" },
                        body: JSON.stringify(body),
                    }),
            });
        }
        catch (err) {
            throw new ApiError(0, `network error: ${String(err)}`);
        }
        const text = await resp.text();
        let parsed = null;
        try {
            parsed = text ? JSON.parse(text) : null;
        }
        catch {
            parsed = null; // non-JSON error body; fall through to the status line
        }
        if (!resp.ok) {
            const detail = parsed !== null && typeof parsed === "object" && "error" in parsed
                ? String(parsed.error)
                : `HTTP ${resp.status}`;
            throw new ApiError(resp.status, detail);
        }
        return parsed;
    }
    session() {
        return this.request("GET", "/api/session");
    }
    /** The row awaiting a label, or null once the budget is spent (410). */
    async next() {
        try {
            return await this.request("GET", "/api/next");
        }
        catch (err) {
            if (err instanceof ApiError && err.status === 410)
                return null;
            throw err;
        }
    }
    label(rowId, label) {
        return this.request("POST", "/api/label", { row_id: rowId, label });
    }
    async metrics() {
        const body = await this.request("GET", "/api/metrics");
        return body.records;
    }
    checkpoint() {
        return this.request("POST", "/api/checkpoint");
    }
}
