"""HTTP labeling service: a person answers the queries the engine selects.

One process hosts one labeling session. The engine is the same stepper the
oracle mode drives; only the source of labels differs, so a scripted client
answering with oracle labels reproduces an in-process run exactly.

The protocol is a strict request/response loop over the engine's pending
row. GET /api/next returns the row awaiting a label (410 once the budget is
spent); POST /api/label accepts {"row_id", "label"} for exactly that row
(409 for any other row, 400 for malformed bodies). GET /api/session and
GET /api/metrics expose progress, POST /api/checkpoint persists engine
state for later resumption. Completed rounds append to the same results
JSON Lines file format the batch runner writes.

The HTTP layer is threaded; every touch of the engine serializes through
one lock, so concurrent clients cannot interleave half-applied steps.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .data import EmbeddingDataset
from .engine import ActiveRun, EngineError

logger = logging.getLogger("seals.service")


class BadRequest(ValueError):
    """Malformed client input: wrong shape, type, or value."""


class Conflict(ValueError):
    """Label for a row that is not the pending one."""


class LabelingSession:
    """Single labeling run plus its results file, guarded by one lock."""

    def __init__(
        self,
        run: ActiveRun,
        dataset: EmbeddingDataset,
        cell: str,
        out_dir: str | Path,
        payload_template: str | None = None,
        record_timings: bool = True,
        resumed: bool = False,
    ) -> None:
        self.run = run
        self.dataset = dataset
        self.cell = cell
        self.out_dir = Path(out_dir)
        self.payload_template = payload_template
        self.record_timings = record_timings
        self.lock = threading.Lock()
        self.results_path = self.out_dir / "results" / f"{cell}.jsonl"
        self.checkpoint_path = self.out_dir / "checkpoint.json"
        # rounds restored from a checkpoint were written by the previous
        # process; a fresh session still owes the file its seed-round record
        self._written_rounds = len(run.records) if resumed else 0
        self._drain_records()

    # callers hold self.lock for everything below

    def _drain_records(self) -> None:
        fresh = self.run.records[self._written_rounds :]
        if not fresh:
            return
        self.results_path.parent.mkdir(parents=True, exist_ok=True)
        lines = "".join(
            json.dumps(
                r.to_row(self.run.config.concept, 0, timings=self.record_timings)
            )
            + "\n"
            for r in fresh
        )
        with open(self.results_path, "a", encoding="utf-8") as fh:
            fh.write(lines)
        self._written_rounds = len(self.run.records)

    def snapshot(self) -> dict:
        rec = self.run.records[-1] if self.run.records else None
        return {
            "concept": self.run.config.concept,
            "budget": self.run.config.budget,
            "batch_size": self.run.config.batch_size,
            "labeled": len(self.run.labeled),
            "positives": self.run.labeled.num_positives,
            "round": rec.round_index if rec else None,
            "pool_size": self.run.pool.size,
            "pool_frac": self.run.pool.size / self.dataset.n,
            "done": self.run.complete,
        }

    def next_item(self) -> dict | None:
        row = self.run.pending()
        if row is None:
            return None
        item = {"row_id": row, "external_id": self.dataset.ids[row]}
        if self.payload_template is not None:
            item["payload_uri"] = self.payload_template.format(
                external_id=self.dataset.ids[row], row_id=row
            )
        return item

    def submit(self, body: dict) -> dict:
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        unknown = sorted(set(body) - {"row_id", "label"})
        if unknown:
            raise BadRequest(f"unknown keys {unknown}")
        row = body.get("row_id")
        label = body.get("label")
        if not isinstance(row, int) or isinstance(row, bool):
            raise BadRequest("'row_id' must be an integer")
        if label not in (1, -1) or isinstance(label, bool):
            raise BadRequest("'label' must be 1 or -1")
        if self.run.complete:
            raise Conflict("session is complete")
        if row != self.run.pending():
            raise Conflict(
                f"row {row} is not awaiting a label "
                f"(pending: {self.run.pending()})"
            )
        try:
            self.run.submit(row, label)
        except EngineError as exc:
            raise Conflict(str(exc)) from exc
        self._drain_records()
        return {"ok": True, "labeled": len(self.run.labeled), "done": self.run.complete}

    def metrics(self) -> dict:
        return {
            "records": [
                r.to_row(self.run.config.concept, 0, timings=self.record_timings)
                for r in self.run.records
            ]
        }

    def checkpoint(self) -> dict:
        state = self.run.to_state()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.checkpoint_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh)
        tmp.replace(self.checkpoint_path)
        return {"path": str(self.checkpoint_path), "round": state["round"]}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    # routing tables filled in by make_server via the server object
    @property
    def session(self) -> LabelingSession:
        return self.server.session  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, code: int, obj: dict) -> None:
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = self.headers.get("Content-Length")
        try:
            raw = self.rfile.read(int(length)) if length else b""
            body = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise BadRequest(f"invalid JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        return body

    def do_GET(self) -> None:
        session = self.session
        if self.path == "/api/session":
            with session.lock:
                self._send_json(200, session.snapshot())
        elif self.path == "/api/next":
            with session.lock:
                item = session.next_item()
            if item is None:
                self._send_json(410, {"error": "session complete"})
            else:
                self._send_json(200, item)
        elif self.path == "/api/metrics":
            with session.lock:
                self._send_json(200, session.metrics())
        elif self.path.startswith("/api/"):
            self._send_json(404, {"error": f"unknown endpoint {self.path}"})
        else:
            self._serve_static()

    def do_POST(self) -> None:
        session = self.session
        try:
            if self.path == "/api/label":
                body = self._read_body()
                with session.lock:
                    self._send_json(200, session.submit(body))
            elif self.path == "/api/checkpoint":
                with session.lock:
                    self._send_json(200, session.checkpoint())
            else:
                self._send_json(404, {"error": f"unknown endpoint {self.path}"})
        except BadRequest as exc:
            self._send_json(400, {"error": str(exc)})
        except Conflict as exc:
            self._send_json(409, {"error": str(exc)})

    def _serve_static(self) -> None:
        static_dir = self.server.static_dir  # type: ignore[attr-defined]
        if static_dir is None:
            self._send_json(
                404,
                {
                    "error": "no UI assets configured",
                    "api": ["/api/session", "/api/next", "/api/label",
                            "/api/metrics", "/api/checkpoint"],
                },
            )
            return
        rel = self.path.lstrip("/") or "index.html"
        target = (static_dir / rel.split("?", 1)[0]).resolve()
        if not target.is_relative_to(static_dir.resolve()) or not target.is_file():
            self._send_json(404, {"error": f"no such asset {self.path}"})
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_server(
    session: LabelingSession,
    port: int = 8080,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Bind the service; port 0 picks an ephemeral port (see server_port)."""
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    server.session = session  # type: ignore[attr-defined]
    server.static_dir = Path(static_dir) if static_dir is not None else None  # type: ignore[attr-defined]
    return server
