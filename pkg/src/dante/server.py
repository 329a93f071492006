"""HTTP JSON API over a pipeline state directory, plus static hosting for
the triage UI under /ui/.

Reads always come from committed files, so they never block the pipeline;
label POSTs either queue into a running pipeline (applied at the next window
boundary) or, in serve-only mode, apply to the registry immediately.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from dante.concepts import ConceptRegistry, Severity
from dante.embedding import EmbeddingTable, nearest_ports
from dante.pipeline import ALERTS_FILE, REGISTRY_FILE, STATE_FILE, TIMELINE_FILE, Pipeline, report_path

log = logging.getLogger("dante.server")


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class StateView:
    """Read-side access to a state directory, with optional hooks into a
    live pipeline (label queue) and embedding table (port context)."""

    def __init__(
        self,
        state_dir: str,
        pipeline: Pipeline | None = None,
        table: EmbeddingTable | None = None,
    ):
        self.state_dir = state_dir
        self.pipeline = pipeline
        self.table = table
        self._label_lock = threading.Lock()

    # -- helpers -------------------------------------------------------------

    def _read_state(self) -> dict:
        path = os.path.join(self.state_dir, STATE_FILE)
        if not os.path.exists(path):
            raise ApiError(404, "no pipeline state yet")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def _registry(self) -> ConceptRegistry:
        path = os.path.join(self.state_dir, REGISTRY_FILE)
        if not os.path.exists(path):
            raise ApiError(404, "no registry yet")
        return ConceptRegistry.load(path)

    # -- endpoints -----------------------------------------------------------

    def window_report(self, index: int) -> dict:
        path = report_path(self.state_dir, index)
        if not os.path.exists(path):
            raise ApiError(404, f"window {index} not available")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def latest_window(self) -> dict:
        state = self._read_state()
        last = state.get("last_window", -1)
        if last < 0:
            raise ApiError(404, "no windows processed yet")
        return self.window_report(last)

    def _concept_summary(self, model) -> dict:
        return {
            "id": model.concept_id,
            "first_seen": model.first_seen,
            "last_seen": model.last_seen,
            "occurrences": model.occurrence_count,
            "category": model.category.value,
            "severity": model.severity.value,
            "note": model.note,
            "exemplars": [list(e) for e in model.exemplars],
        }

    def concepts(self, novel_since: int | None = None) -> dict:
        registry = self._registry()
        models = registry.ordered()
        if novel_since is not None:
            models = [m for m in models if m.first_seen > novel_since]
        return {"v": 1, "concepts": [self._concept_summary(m) for m in models]}

    def concept_detail(self, concept_id: str) -> dict:
        registry = self._registry()
        try:
            model = registry.get(concept_id)
        except KeyError:
            raise ApiError(404, f"concept {concept_id} not found") from None
        detail = self._concept_summary(model)
        detail["history"] = model.history
        detail["port_context"] = self._port_context(model)
        return {"v": 1, "concept": detail}

    def _port_context(self, model) -> list[dict]:
        if self.table is None:
            return []
        seen: list[int] = []
        for exemplar in model.exemplars:
            for port in exemplar:
                if port not in seen:
                    seen.append(port)
        context = []
        for port in seen[:8]:
            if port not in self.table:
                continue
            neighbors = nearest_ports(port, self.table, k=5)
            context.append(
                {"port": port, "neighbors": [[p, round(s, 4)] for p, s in neighbors]}
            )
        return context

    def alerts(self, since: int | None = None) -> dict:
        path = os.path.join(self.state_dir, ALERTS_FILE)
        items = []
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    alert = json.loads(line)
                    if since is None or alert["window"] >= since:
                        items.append(alert)
        return {"v": 1, "alerts": items}

    def timeline(self, start: int | None, end: int | None) -> dict:
        path = os.path.join(self.state_dir, TIMELINE_FILE)
        rows = []
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                rows = [json.loads(line) for line in fh if line.strip()]
        if not rows:
            return {"v": 1, "windows": [], "series": {}, "noise": []}
        lo = rows[0]["window"] if start is None else start
        hi = rows[-1]["window"] if end is None else end
        windows = list(range(lo, hi + 1))
        by_window = {row["window"]: row for row in rows}
        concept_ids = sorted({cid for row in rows for cid in row["sizes"]})
        series = {
            cid: [by_window.get(w, {}).get("sizes", {}).get(cid) for w in windows]
            for cid in concept_ids
        }
        noise = [by_window.get(w, {}).get("noise") for w in windows]
        return {"v": 1, "windows": windows, "series": series, "noise": noise}

    def submit_label(self, concept_id: str, body: dict) -> dict:
        severity = body.get("severity")
        note = body.get("note", "")
        author = body.get("author", "analyst")
        key = body.get("key")
        try:
            Severity(severity)
        except ValueError:
            raise ApiError(400, f"unknown severity {severity!r}") from None

        if self.pipeline is not None:
            # existence check against the committed registry; application
            # itself waits for the window boundary
            registry = self._registry()
            if concept_id not in registry:
                raise ApiError(404, f"concept {concept_id} not found")
            self.pipeline.submit_label(concept_id, severity, note, author, key)
            return {"v": 1, "status": "queued", "concept": concept_id, "severity": severity}

        with self._label_lock:
            registry = self._registry()
            try:
                registry.annotate(concept_id, severity, note=note, author=author, key=key)
            except KeyError:
                raise ApiError(404, f"concept {concept_id} not found") from None
            tmp = os.path.join(self.state_dir, REGISTRY_FILE + ".tmp")
            registry.save(tmp)
            os.replace(tmp, os.path.join(self.state_dir, REGISTRY_FILE))
        return {"v": 1, "status": "applied", "concept": concept_id, "severity": severity}


_ROUTES = [
    (re.compile(r"^/api/windows/latest$"), "latest"),
    (re.compile(r"^/api/windows/(\d+)$"), "window"),
    (re.compile(r"^/api/concepts$"), "concepts"),
    (re.compile(r"^/api/concepts/([^/]+)$"), "concept"),
    (re.compile(r"^/api/alerts$"), "alerts"),
    (re.compile(r"^/api/timeline$"), "timeline"),
]


class _Handler(BaseHTTPRequestHandler):
    view: StateView  # set by make_server
    ui_dir: str | None = None

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, obj: dict, status: int = 200) -> None:
        payload = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(payload)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"v": 1, "error": message}, status)

    def _query_int(self, query: dict, name: str) -> int | None:
        if name not in query:
            return None
        try:
            return int(query[name][0])
        except ValueError:
            raise ApiError(400, f"query parameter {name} must be an integer") from None

    def do_GET(self):
        parsed = urlparse(self.path)
        path = parsed.path
        query = parse_qs(parsed.query)
        try:
            if path == "/" :
                self._send_json({"v": 1, "service": "dante", "ui": "/ui/"})
                return
            if path.startswith("/ui"):
                self._serve_static(path)
                return
            for pattern, name in _ROUTES:
                m = pattern.match(path)
                if not m:
                    continue
                if name == "latest":
                    self._send_json(self.view.latest_window())
                elif name == "window":
                    self._send_json(self.view.window_report(int(m.group(1))))
                elif name == "concepts":
                    self._send_json(
                        self.view.concepts(self._query_int(query, "novel_since"))
                    )
                elif name == "concept":
                    self._send_json(self.view.concept_detail(m.group(1)))
                elif name == "alerts":
                    self._send_json(self.view.alerts(self._query_int(query, "since")))
                elif name == "timeline":
                    self._send_json(
                        self.view.timeline(
                            self._query_int(query, "from"), self._query_int(query, "to")
                        )
                    )
                return
            self._send_error_json(404, f"no such endpoint: {path}")
        except ApiError as exc:
            self._send_error_json(exc.status, str(exc))
        except Exception:
            log.exception("GET %s failed", self.path)
            self._send_error_json(500, "internal error")

    def do_POST(self):
        parsed = urlparse(self.path)
        m = re.match(r"^/api/concepts/([^/]+)/label$", parsed.path)
        try:
            if not m:
                self._send_error_json(404, f"no such endpoint: {parsed.path}")
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                raise ApiError(400, "body must be JSON") from None
            self._send_json(self.view.submit_label(m.group(1), body))
        except ApiError as exc:
            self._send_error_json(exc.status, str(exc))
        except Exception:
            log.exception("POST %s failed", self.path)
            self._send_error_json(500, "internal error")

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            raise ApiError(404, "UI assets not configured (--ui-dir)")
        rel = path[len("/ui") :].lstrip("/") or "index.html"
        root = os.path.realpath(self.ui_dir)
        full = os.path.realpath(os.path.join(root, rel))
        if not full.startswith(root + os.sep) and full != root:
            raise ApiError(404, "not found")
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.exists(full):
            raise ApiError(404, f"no such asset: {rel}")
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            payload = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


def make_server(
    addr: tuple[str, int],
    view: StateView,
    ui_dir: str | None = None,
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"view": view, "ui_dir": ui_dir})
    return ThreadingHTTPServer(addr, handler)


def serve_forever_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
